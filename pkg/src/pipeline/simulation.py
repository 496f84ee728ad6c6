"""
Dataset Simulation
Bakes jittered illumination into known albedos so that de-lighting operators can be
trained or evaluated against paired ground truth.

Bundle layout (one directory per asset):

    bundle.json
    <asset>/mesh.obj
    <asset>/albedo.rmap          ground-truth diffuse albedo
    <asset>/normals.rmap         N_O at the albedo resolution
    <asset>/depth.rmap           D_O at the albedo resolution
    <asset>/texture_v<i>.rmap    exact bake of variation i
    <asset>/texture_v<i>.png     16-bit preview of the same bake
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import ConfigError, GeometryError
from ..geometry.conditioning import depth_map, object_normal_map, uv_coverage
from ..geometry.mesh import Mesh
from ..geometry.obj_io import load_obj, save_obj
from ..raster.io import load_raster, save_raster
from ..raster.maps import MapKind, RasterMap
from ..shading.bake import bake_texture
from ..shading.lighting import LightingRig, ShadingParams
from ..utils.serialization import to_json

logger = logging.getLogger(__name__)

BUNDLE_NAME = "bundle.json"

Asset = Tuple[str, Mesh, RasterMap]


@dataclass
class AssetSamples:
    """Ground truth and baked variations of one asset"""

    name: str
    mesh: Mesh
    albedo: RasterMap
    normals: RasterMap
    depth: RasterMap
    textures: List[RasterMap] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)


@dataclass
class SimulationBundle:
    """All simulated assets plus the run parameters"""

    seed: int
    rig_name: str
    assets: Dict[str, AssetSamples] = field(default_factory=dict)
    root: Optional[Path] = None


def variation_seed(seed: int, index: int) -> int:
    """Seed of the index-th bake; shared by every asset of a bundle"""
    return seed + index


def _check_topology(assets: Sequence[Asset]):
    if not assets:
        raise ConfigError("simulate_dataset needs at least one asset")
    names = [name for name, _, _ in assets]
    if len(set(names)) != len(names):
        raise ConfigError(f"Asset names must be unique, got {names}")
    _, template, _ = assets[0]
    for name, mesh, albedo in assets[1:]:
        if mesh.topology_id != template.topology_id or mesh.n_triangles != template.n_triangles:
            raise GeometryError(
                f"Asset '{name}' has topology '{mesh.topology_id}' ({mesh.n_triangles} triangles); "
                f"expected '{template.topology_id}' ({template.n_triangles} triangles)"
            )
    for name, _, albedo in assets:
        if albedo.kind != MapKind.DIFFUSE_ALBEDO:
            raise ConfigError(f"Asset '{name}': expected a diffuse albedo, got '{albedo.kind.value}'")


def simulate_dataset(
    assets: Sequence[Asset],
    rig: LightingRig,
    n_variations: int,
    seed: int,
    params: Optional[ShadingParams] = None,
    output_dir: Optional[Path] = None,
    rig_name: str = "rig",
) -> SimulationBundle:
    """
    Bake ``n_variations`` textures per asset under jittered copies of ``rig``

    Args:
        assets: (name, mesh, sRGB diffuse albedo) triples sharing one template topology
        rig: Capture rig; its jitter_sigma controls how much lights move per variation
        n_variations: Bakes per asset
        seed: Base seed; variation i bakes with variation_seed(seed, i)
        params: Shading parameters of the bakes
        output_dir: Write the bundle here when given

    Raises:
        GeometryError: assets do not share a topology
        ConfigError: no assets, duplicate names or n_variations < 1
    """
    if n_variations < 1:
        raise ConfigError(f"n_variations must be >= 1, got {n_variations}")
    _check_topology(assets)
    params = params or ShadingParams()

    bundle = SimulationBundle(seed=seed, rig_name=rig_name)
    for name, mesh, albedo in assets:
        coverage = uv_coverage(mesh, albedo.width, albedo.height)
        samples = AssetSamples(
            name=name,
            mesh=mesh,
            albedo=albedo,
            normals=object_normal_map(mesh, albedo.width, albedo.height, coverage),
            depth=depth_map(mesh, albedo.width, albedo.height, coverage),
        )
        for i in range(n_variations):
            s = variation_seed(seed, i)
            samples.textures.append(bake_texture(albedo, mesh, rig, params, seed=s))
            samples.seeds.append(s)
        bundle.assets[name] = samples
        logger.info(f"Simulated {n_variations} bake(s) of '{name}' at {albedo.width}x{albedo.height}")

    if output_dir is not None:
        save_bundle(bundle, Path(output_dir))
    return bundle


def save_bundle(bundle: SimulationBundle, root: Path) -> Path:
    """Write every map of a bundle plus bundle.json"""
    root.mkdir(parents=True, exist_ok=True)
    index = {"seed": bundle.seed, "rig": bundle.rig_name, "assets": {}}
    for name, samples in bundle.assets.items():
        folder = root / name
        save_obj(samples.mesh, folder / "mesh.obj")
        save_raster(samples.albedo, folder / "albedo.rmap")
        save_raster(samples.normals, folder / "normals.rmap")
        save_raster(samples.depth, folder / "depth.rmap")
        variations = []
        for i, (texture, s) in enumerate(zip(samples.textures, samples.seeds)):
            save_raster(texture, folder / f"texture_v{i}.rmap")
            save_raster(texture, folder / f"texture_v{i}.png", bits=16)
            variations.append({"index": i, "seed": s, "texture": f"{name}/texture_v{i}.rmap"})
        index["assets"][name] = {
            "topology_id": samples.mesh.topology_id,
            "resolution": list(samples.albedo.resolution),
            "variations": variations,
        }
    path = root / BUNDLE_NAME
    path.write_text(to_json(index) + "\n")
    bundle.root = root
    logger.info(f"Bundle saved: {path}")
    return path


def load_bundle(root: Path) -> SimulationBundle:
    """
    Read a bundle written by simulate_dataset

    Raises:
        ConfigError: missing or malformed bundle.json
    """
    root = Path(root)
    path = root / BUNDLE_NAME
    if not path.exists():
        raise ConfigError(f"No {BUNDLE_NAME} in {root}")
    try:
        index = json.loads(path.read_text())
        bundle = SimulationBundle(seed=index["seed"], rig_name=index["rig"], root=root)
        for name, entry in index["assets"].items():
            folder = root / name
            samples = AssetSamples(
                name=name,
                mesh=load_obj(folder / "mesh.obj"),
                albedo=load_raster(folder / "albedo.rmap", MapKind.DIFFUSE_ALBEDO),
                normals=load_raster(folder / "normals.rmap", MapKind.NORMALS_OBJECT),
                depth=load_raster(folder / "depth.rmap", MapKind.DEPTH),
            )
            for variation in entry["variations"]:
                samples.textures.append(load_raster(root / variation["texture"], MapKind.BAKED_TEXTURE))
                samples.seeds.append(variation["seed"])
            bundle.assets[name] = samples
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"Malformed bundle {path}: {e}") from e
    return bundle
