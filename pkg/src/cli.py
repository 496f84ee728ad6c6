"""
CLI Interface for the Reflectance Pipeline

Provides subcommands: run, bake, render, eval, simulate, make-asset
Install with: pip install -e .
Usage: pipeline run --config config.json
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional

import click
import numpy as np

from .config import PatchConfig, PipelineConfig, RigConfig, ShadingConfig
from .errors import PipelineError
from .geometry import load_obj, save_obj
from .geometry.synthetic import face_asset
from .metrics import FORMATS, MetricReport, format_report
from .pipeline import STAGE_ORDER, Manifest, PipelineRunner, simulate_dataset
from .raster import ColorSpace, MapKind, RasterMap, load_raster, save_raster
from .shading import ReflectanceSet, bake_texture, orbit_cameras, render_views
from .shading.renderer import to_display

MAP_KINDS = [kind.value for kind in MapKind]


def _configure_logging(verbose: bool, quiet: bool):
    """Set up logging based on verbosity flags."""
    if quiet:
        level = logging.WARNING
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", force=True)


def _banner(title: str):
    click.echo("=" * 70)
    click.echo(f"  {title}")
    click.echo("=" * 70)


def _rig_config(preset: str, jitter: float = 0.0, env_path: Optional[str] = None) -> RigConfig:
    """Rig entry for a preset name, or an environment-map rig when env_path is given"""
    if env_path:
        return RigConfig(name=Path(env_path).stem, preset=None, env_path=env_path, jitter_sigma=jitter)
    return RigConfig(name=preset, preset=preset, jitter_sigma=jitter)


def _parse_views(views: str):
    names = [v.strip() for v in views.split(",") if v.strip()]
    if not names:
        raise click.BadParameter("At least one view is required.", param_hint="--views")
    return names


@click.group()
@click.option("-v", "--verbose", is_flag=True, default=False, help="Enable debug logging.")
@click.option("-q", "--quiet", is_flag=True, default=False, help="Suppress info logging.")
@click.pass_context
def cli(ctx, verbose, quiet):
    """Reflectance pipeline.

    Turn a fitted face mesh and its texture into diffuse/specular albedo, normals and
    displacement, then relight the result.
    """
    _configure_logging(verbose, quiet)
    ctx.ensure_object(dict)


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path), help="Pipeline config (JSON).")
@click.option("--profile", type=click.Choice(["desk", "full"]), default=None,
              help="Override the config's resolution profile.")
@click.option("--from-stage", type=click.Choice(list(STAGE_ORDER)), default=None,
              help="Resume at this stage using the cached outputs of earlier stages.")
@click.option("--workers", type=int, default=None, help="Worker threads (default: from config).")
@click.option("--output-dir", default=None, help="Override the config's output directory.")
def run(config_path, profile, from_stage, workers, output_dir):
    """Run the full pipeline described by a config file.

    Example: pipeline run --config face/config.json --workers 4
    """
    if workers is not None and workers < 1:
        raise click.BadParameter("must be >= 1", param_hint="--workers")
    try:
        config = PipelineConfig.load_from_file(
            config_path, profile=profile, workers=workers, output_dir=output_dir
        )
        runner = PipelineRunner(config, base_dir=config_path.parent)
        _banner(f"Reflectance pipeline (seed {config.seed}, profile {config.profile})")
        result = runner.run(from_stage=from_stage)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e

    click.echo(f"\n✓ Pipeline finished: {result.output_dir}")
    for stage, record in result.manifest.stages.items():
        click.echo(f"  - {stage}: {', '.join(record.outputs) or '(no outputs)'}")
    if result.report is not None:
        click.echo()
        click.echo(format_report(result.report, "table"))


@cli.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Mesh (.obj).")
@click.option("--albedo", "albedo_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="sRGB diffuse albedo.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path),
              help="Baked texture (.png or .rmap).")
@click.option("--seed", required=True, type=int, help="Bake seed (light jitter and sampling).")
@click.option("--rig", "preset", type=click.Choice(["studio", "uniform"]), default="studio")
@click.option("--env", "env_path", default=None, help="Linear lat-long environment raster.")
@click.option("--jitter", default=0.0, type=float, help="Light position jitter (model units).")
@click.option("--env-samples", default=64, type=int, help="Environment samples per texel.")
def bake(mesh_path, albedo_path, out, seed, preset, env_path, jitter, env_samples):
    """Bake illumination into an albedo, simulating a captured texture.

    Example: pipeline bake --mesh face.obj --albedo albedo.png --out texture.png --seed 7
    """
    try:
        mesh = load_obj(mesh_path)
        albedo = load_raster(albedo_path, MapKind.DIFFUSE_ALBEDO)
        rig = _rig_config(preset, jitter, env_path).to_rig(Path.cwd())
        params = ShadingConfig(env_samples=env_samples).to_params()
        texture = bake_texture(albedo, mesh, rig, params, seed=seed)
        save_raster(texture, out)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e
    click.echo(f"✓ Baked {texture.width}x{texture.height} texture: {out}")


def _recorded_map(manifest: Manifest, stage: str, name: str) -> RasterMap:
    entry = manifest.output(stage, name)
    return load_raster(manifest.root / entry["file"], entry["kind"])


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--rig", "preset", type=click.Choice(["studio", "uniform"]), default="studio")
@click.option("--env", "env_path", default=None, help="Linear lat-long environment raster.")
@click.option("--views", default="frontal,left,right", help="Comma-separated views.")
@click.option("--size", default=256, type=int, help="Square render size in pixels.")
@click.option("--seed", default=0, type=int, help="Sampling seed.")
@click.option("--env-samples", default=64, type=int, help="Environment samples per pixel.")
@click.option("--out", default=None, type=click.Path(file_okay=False, path_type=Path),
              help="Directory for the renders (default: RUN_DIR/renders-<rig>).")
def render(run_dir, preset, env_path, views, size, seed, env_samples, out):
    """Relight the maps and embossed mesh of a finished run.

    Example: pipeline render output --rig uniform --views frontal --size 512
    """
    view_names = _parse_views(views)
    if size < 1:
        raise click.BadParameter("must be >= 1", param_hint="--size")
    try:
        manifest = Manifest.load(run_dir)
        refl = ReflectanceSet(
            diffuse_albedo=_recorded_map(manifest, "delta", "diffuse_albedo"),
            specular_albedo=_recorded_map(manifest, "psi", "specular_albedo"),
            diffuse_normals=_recorded_map(manifest, "sigma", "diffuse_normals"),
            specular_normals=_recorded_map(manifest, "rho", "specular_normals"),
            displacement=_recorded_map(manifest, "displacement", "displacement"),
        )
        mesh = load_obj(manifest.path_of("emboss", "embossed"))
        rig_config = _rig_config(preset, env_path=env_path)
        rig = rig_config.to_rig(Path.cwd())
        cameras = orbit_cameras(mesh, size, size, view_names)
        params = ShadingConfig(env_samples=env_samples).to_params()
        results = render_views(mesh, refl, rig, cameras, params, seed)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e

    out = out or run_dir / f"renders-{rig_config.name}"
    _banner(f"Renders under '{rig_config.name}'")
    for view, result in results.items():
        image = result.image
        display = RasterMap(to_display(image), ColorSpace.SRGB, MapKind.TEXTURE, image.mask)
        path = save_raster(display, out / f"{view}.png", bits=8)
        click.echo(f"  - {view}: {path}")


@cli.command(name="eval")
@click.option("--a", "a_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Estimated map.")
@click.option("--b", "b_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Reference map.")
@click.option("--kind", type=click.Choice(MAP_KINDS), default=MapKind.DIFFUSE_ALBEDO.value,
              help="Map kind both files hold.")
@click.option("--mask", "mask_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Gray PNG; texels above 0.5 are compared.")
@click.option("--format", "output_format", type=click.Choice(list(FORMATS)), default="table")
def evaluate(a_path, b_path, kind, mask_path, output_format):
    """PSNR between two maps over mutually valid texels.

    Example: pipeline eval --a out/maps/diffuse_albedo.rmap --b truth.png --format markdown
    """
    try:
        a = load_raster(a_path, kind)
        b = load_raster(b_path, kind)
        mask = None
        if mask_path is not None:
            mask = load_raster(mask_path, MapKind.GRAY).data[:, :, 0] > 0.5
        report = MetricReport.evaluate({kind: (a, b)}, mask)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e
    click.echo(format_report(report, output_format))


@cli.command()
@click.option("--asset", "assets", required=True, multiple=True, nargs=3,
              type=(str, click.Path(exists=True, dir_okay=False), click.Path(exists=True, dir_okay=False)),
              help="NAME MESH ALBEDO; repeat for several assets.")
@click.option("--variations", default=3, type=int, help="Bakes per asset.")
@click.option("--seed", required=True, type=int, help="Base seed.")
@click.option("--rig", "preset", type=click.Choice(["studio", "uniform"]), default="studio")
@click.option("--jitter", default=0.1, type=float, help="Light position jitter (model units).")
@click.option("--env-samples", default=64, type=int, help="Environment samples per texel.")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path),
              help="Bundle directory.")
def simulate(assets, variations, seed, preset, jitter, env_samples, out):
    """Bake jittered-light variations of assets with paired ground truth.

    Example: pipeline simulate --asset a face.obj albedo.png --variations 3 --seed 1 --out sim
    """
    if variations < 1:
        raise click.BadParameter("must be >= 1", param_hint="--variations")
    try:
        loaded = [
            (name, load_obj(mesh), load_raster(albedo, MapKind.DIFFUSE_ALBEDO))
            for name, mesh, albedo in assets
        ]
        rig_config = _rig_config(preset, jitter)
        bundle = simulate_dataset(
            loaded, rig_config.to_rig(), variations, seed,
            params=ShadingConfig(env_samples=env_samples).to_params(), output_dir=out,
            rig_name=rig_config.name,
        )
    except PipelineError as e:
        raise click.ClickException(str(e)) from e

    _banner(f"Simulated bundle: {out}")
    for name, samples in bundle.assets.items():
        click.echo(f"  - {name}: {len(samples.textures)} bake(s), seeds {samples.seeds}")


@cli.command(name="make-asset")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path),
              help="Directory for the asset files.")
@click.option("--width", default=144, type=int, help="Texture width.")
@click.option("--height", default=96, type=int, help="Texture height.")
@click.option("--scale", default=8, type=int, help="Super-resolution factor written to the config.")
@click.option("--seed", default=0, type=int, help="Seed of the albedo and the bake.")
@click.option("--env-samples", default=64, type=int, help="Environment samples per texel.")
@click.option("--render-size", default=256, type=int, help="Render size written to the config.")
@click.option("--no-pores", is_flag=True, default=False, help="Skip procedural pores.")
def make_asset(out, width, height, scale, seed, env_samples, render_size, no_pores):
    """Write a procedural face mesh, albedo, baked texture and a matching config.

    Example: pipeline make-asset --out face --width 144 --height 96
    """
    if width < 2 or height < 2 or scale < 1:
        raise click.BadParameter("width and height must be >= 2 and scale >= 1")
    try:
        mesh, albedo = face_asset(width, height, seed=seed, pores=not no_pores)
        shading = ShadingConfig(env_samples=env_samples, render_size=render_size)
        texture = bake_texture(albedo, mesh, RigConfig().to_rig(), shading.to_params(), seed=seed)
        save_obj(mesh, out / "face.obj")
        save_raster(albedo, out / "albedo.png")
        save_raster(texture, out / "texture.png")
    except PipelineError as e:
        raise click.ClickException(str(e)) from e

    patches = PatchConfig(patch=24 * scale, stride=12 * scale)
    config: Dict = {
        "seed": seed,
        "mesh_path": "face.obj",
        "texture_path": "texture.png",
        "truth_albedo_path": "albedo.png",
        "output_dir": "output",
        "texture_size": [width, height],
        "scale": scale,
        "patches": {"patch": patches.patch, "stride": patches.stride},
        "shading": {"env_samples": env_samples, "render_size": render_size},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")

    _banner(f"Asset written to {out}")
    coverage = float(np.mean(texture.validity()))
    click.echo(f"  Texture {width}x{height}, {coverage:.0%} of texels covered")
    click.echo(f"  Run with: pipeline run --config {out / 'config.json'}")


if __name__ == "__main__":
    cli()
