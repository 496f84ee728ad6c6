"""
Pipeline Runner
Drives the reflectance data path stage by stage:

    load -> zeta -> conditioning -> delta -> luma -> psi -> rho -> sigma
         -> displacement -> emboss -> render -> evaluate

Every stage hands its outputs to the next through float rasters under
``<output_dir>/maps`` and records them in the run manifest, so a run can resume
from any stage after ``load``.
"""

import hashlib
import json
import logging
import time
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from ..color.colorspace import luma_gray, srgb_decode, srgb_encode
from ..config import PipelineConfig
from ..displacement.integration import displacement_from_normals
from ..errors import ConfigError, MetricError, StageError
from ..geometry.conditioning import depth_map, object_normal_map, tangent_normal_map, uv_coverage
from ..geometry.mesh import Mesh, emboss, subdivide
from ..geometry.obj_io import load_obj, save_obj
from ..metrics.formatters import format_report
from ..metrics.report import MetricReport, seam_metric
from ..operators.base import CONTRACTS, TranslationOperator
from ..operators.external import external_operator
from ..operators.reference import (
    LightingSideChannel,
    ReferenceZeta,
    delight_delta,
    diff_normals_sigma,
    spec_albedo_psi,
    spec_normals_rho,
    sr_zeta,
)
from ..patches.grid import plan_grid
from ..raster.io import load_raster, save_raster
from ..raster.maps import ColorSpace, MapKind, RasterMap
from ..raster.resample import box_downsample
from ..shading.bake import BakeComponents, compose_bake, shadow_mask
from ..shading.lighting import LightingRig, ReflectanceSet
from ..shading.renderer import RenderResult, orbit_cameras, render_views, to_display
from .manifest import CONFIG_NAME, Manifest

logger = logging.getLogger(__name__)

STAGE_ORDER = (
    "load",
    "zeta",
    "conditioning",
    "delta",
    "luma",
    "psi",
    "rho",
    "sigma",
    "displacement",
    "emboss",
    "render",
    "evaluate",
)
MAPS_DIR = "maps"
RENDERS_DIR = "renders"
MESH_KIND = "mesh"
EVAL_MIN_IRRADIANCE = 0.05
MAP_KINDS = {kind.value for kind in MapKind}


def _resolve(value: str, base_dir: Path) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


def config_hash(config: PipelineConfig) -> str:
    """sha256 of the configuration, ignoring where outputs go and how many threads run"""
    data = config.to_dict()
    data.pop("output_dir", None)
    data.pop("workers", None)
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf8")).hexdigest()


@dataclass
class PipelineResult:
    """
    Outputs of one pipeline run

    Attributes:
        output_dir: Directory holding maps, meshes, renders and the manifest
        manifest: Stage records of the run
        maps: Every map produced or reloaded, by output name
        meshes: "mesh" (input) and "embossed"
        renders: rig name -> view -> render
        report: Evaluation report (None when evaluation did not run)
    """

    output_dir: Path
    manifest: Manifest
    maps: Dict[str, RasterMap] = field(default_factory=dict)
    meshes: Dict[str, Mesh] = field(default_factory=dict)
    renders: Dict[str, Dict[str, RenderResult]] = field(default_factory=dict)
    report: Optional[MetricReport] = None

    def reflectance(self) -> ReflectanceSet:
        return ReflectanceSet(
            diffuse_albedo=self.maps["diffuse_albedo"],
            specular_albedo=self.maps["specular_albedo"],
            diffuse_normals=self.maps["diffuse_normals"],
            specular_normals=self.maps["specular_normals"],
            displacement=self.maps.get("displacement"),
        )


class PipelineRunner:
    """Runs the configured pipeline and writes its artifacts"""

    def __init__(self, config: PipelineConfig, base_dir: Optional[Path] = None):
        """
        Initialize PipelineRunner

        Args:
            config: Pipeline configuration
            base_dir: Directory relative paths in the config resolve against
                (the config file's directory; the working directory when omitted)
        """
        self.config = config
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self.output_dir = _resolve(config.output_dir, self.base_dir)
        self.maps_dir = self.output_dir / MAPS_DIR
        self.params = config.shading.to_params(config.workers)
        self.manifest = Manifest(
            root=self.output_dir, seed=config.seed, profile=config.profile,
            config_sha256=config_hash(config),
        )
        self.result = PipelineResult(output_dir=self.output_dir, manifest=self.manifest)
        self._rig: Optional[LightingRig] = None
        self._components: Optional[BakeComponents] = None
        self._operators = ExitStack()

        self.stages: Dict[str, Callable[[], None]] = {
            "load": self._load,
            "zeta": self._zeta,
            "conditioning": self._conditioning,
            "delta": self._delta,
            "luma": self._luma,
            "psi": self._psi,
            "rho": self._rho,
            "sigma": self._sigma,
            "displacement": self._displacement,
            "emboss": self._emboss,
            "render": self._render,
            "evaluate": self._evaluate,
        }

    @property
    def maps(self) -> Dict[str, RasterMap]:
        return self.result.maps

    @property
    def meshes(self) -> Dict[str, Mesh]:
        return self.result.meshes

    # ==================== Driver ====================

    def run(self, from_stage: Optional[str] = None) -> PipelineResult:
        """
        Run every stage, or resume at ``from_stage`` with cached upstream outputs

        The load stage always runs. Stages before ``from_stage`` are restored from the
        previous manifest in the output directory.

        Raises:
            ConfigError: invalid config, unknown stage, or missing cached outputs
            StageError: a stage failed; carries the last good artifact path
        """
        start = 0
        if from_stage is not None:
            if from_stage not in STAGE_ORDER:
                raise ConfigError(f"Unknown stage '{from_stage}'; choose from {list(STAGE_ORDER)}")
            start = STAGE_ORDER.index(from_stage)
        self.config.validate(self.base_dir)
        names = [rig.name for rig in [self.config.rig] + list(self.config.render_rigs)]
        if len(set(names)) != len(names):
            raise ConfigError(f"Rig names must be unique, got {names}")

        self.output_dir.mkdir(parents=True, exist_ok=True)
        if start > 1:
            self._restore(STAGE_ORDER[1:start])
        self.config.save_to_file(self.output_dir / CONFIG_NAME)

        logger.info(f"Running pipeline (seed {self.config.seed}, profile {self.config.profile})")
        with self._operators:
            for index, name in enumerate(STAGE_ORDER):
                if 0 < index < start:
                    continue
                self._run_stage(index, name)
        self.manifest.save()
        return self.result

    def _run_stage(self, index: int, name: str):
        logger.info(f"Stage '{name}'")
        self.manifest.drop([name])
        started = time.perf_counter()
        try:
            self.stages[name]()
        except Exception as e:
            last = self.manifest.last_output(STAGE_ORDER[:index])
            last_good = str(self.output_dir / last) if last else None
            self.manifest.save()
            logger.error(f"Stage '{name}' failed: {e}")
            raise StageError(name, e, last_good) from e
        self.manifest.timings[name] = round(time.perf_counter() - started, 6)

    def _restore(self, stages):
        previous = Manifest.load(self.output_dir)
        for stage in stages:
            record = previous.stages.get(stage)
            if record is None:
                raise ConfigError(f"Cannot resume: stage '{stage}' has no cached outputs in {self.output_dir}")
            self.manifest.stages[stage] = record
            for name, entry in record.outputs.items():
                path = self.output_dir / entry["file"]
                if entry["kind"] == MESH_KIND:
                    self.meshes[name] = load_obj(path)
                elif entry["kind"] in MAP_KINDS and path.suffix == ".rmap":
                    map_ = load_raster(path, entry["kind"])
                    if map_.content_hash() != entry["sha256"]:
                        raise ConfigError(f"Cached output {path} changed since it was recorded")
                    self.maps[name] = map_
        logger.info(f"Restored {len(stages)} stage(s) from {self.output_dir}")

    # ==================== Helpers ====================

    def _save_map(self, stage: str, name: str, map_: RasterMap) -> RasterMap:
        path = save_raster(map_, self.maps_dir / f"{name}.rmap")
        self.manifest.record_map(stage, name, map_, path)
        self.maps[name] = map_
        return map_

    def _flags(self, stage: str, **flags):
        self.manifest.stage(stage).flags.update(flags)

    def _operator(self, stage: str, contract=None) -> Optional[TranslationOperator]:
        """External backend for a stage, closed when the run ends; None for the reference"""
        op_config = self.config.operators[stage]
        if op_config.backend == "reference":
            return None
        operator = external_operator(
            stage, op_config.command, timeout=op_config.timeout, workers=self.config.workers,
            contract=contract, cwd=str(self.base_dir),
        )
        return self._operators.enter_context(operator)

    def _tiling(self, stage: str) -> Optional[dict]:
        """apply_tiled arguments for a stage, in the stage's input texels"""
        if not self.config.operators[stage].tiled:
            return None
        patches = self.config.patches
        patch, stride, margin = patches.patch, patches.effective_stride, patches.blend_margin
        if stage == "zeta":
            scale = self.config.scale
            patch, stride = patch // scale, max(stride // scale, 1)
            margin = None if margin is None else margin // scale
        return {"patch": patch, "stride": stride, "blend_margin": margin, "workers": self.config.workers}

    def _capture_rig(self) -> LightingRig:
        if self._rig is None:
            self._rig = self.config.rig.to_rig(self.base_dir)
        return self._rig

    def _capture_components(self) -> BakeComponents:
        """Irradiance components of the capture rig at the super-resolved size"""
        if self._components is not None:
            return self._components
        rig = self._capture_rig()
        if "irradiance" in self.maps and "specular_shading" in self.maps:
            self._components = BakeComponents(
                irradiance=self.maps["irradiance"],
                specular=self.maps["specular_shading"],
                rig=rig.jittered(self.config.seed),
            )
        else:
            w, h = self.maps["texture_hat"].resolution
            side_channel = LightingSideChannel(rig, self.meshes["mesh"], self.params, self.config.seed)
            self._components = side_channel.components(w, h)
        return self._components

    # ==================== Stages ====================

    def _load(self):
        mesh = load_obj(_resolve(self.config.mesh_path, self.base_dir))
        texture = load_raster(_resolve(self.config.texture_path, self.base_dir), MapKind.TEXTURE)
        if not self.config.any_size and texture.resolution != tuple(self.config.texture_size):
            w, h = self.config.texture_size
            raise ConfigError(
                f"Texture is {texture.width}x{texture.height}, config expects {w}x{h} "
                f"(set any_size to accept other sizes)"
            )
        self.meshes["mesh"] = mesh
        path = save_obj(mesh, self.output_dir / "mesh.obj")
        self.manifest.record_file("load", "mesh", path, kind=MESH_KIND)
        self._save_map("load", "texture", texture)
        self._flags("load", vertices=mesh.n_vertices, triangles=mesh.n_triangles)

    def _zeta(self):
        operator = self._operator("zeta", replace(CONTRACTS["zeta"], scale=self.config.scale))
        if operator is None:
            operator = ReferenceZeta(self.config.reference, scale=self.config.scale)
        texture_hat = sr_zeta(
            self.maps["texture"],
            any_size=True,
            remap_size=self.config.remap_size,
            operator=operator,
            tiling=self._tiling("zeta"),
        )
        self._save_map("zeta", "texture_hat", texture_hat)

    def _conditioning(self):
        mesh = self.meshes["mesh"]
        w, h = self.maps["texture_hat"].resolution
        coverage = uv_coverage(mesh, w, h)
        self._save_map("conditioning", "normals_object", object_normal_map(mesh, w, h, coverage))
        self._save_map("conditioning", "normals_tangent", tangent_normal_map(mesh, w, h, coverage))
        self._save_map("conditioning", "depth", depth_map(mesh, w, h, coverage))
        self._flags("conditioning", covered_texels=int(coverage.mask.sum()))

    def _delta(self):
        by_depth = self.config.delta_conditioning == "depth"
        conditioning = self.maps["depth"] if by_depth else self.maps["normals_object"]
        operator = self._operator("delta", CONTRACTS["delta" if by_depth else "delta-normals"])
        components = None
        if operator is None:
            components = self._capture_components()
            self._save_map("delta", "irradiance", components.irradiance)
            self._save_map("delta", "specular_shading", components.specular)
        result = delight_delta(
            self.maps["texture_hat"], conditioning, components, self.config.reference,
            operator=operator, tiling=self._tiling("delta"),
        )
        self._save_map("delta", "diffuse_albedo", result.albedo)
        self._flags("delta", filled=result.filled, low_irradiance=int(result.low_irradiance.sum()))

    def _luma(self):
        self._save_map("luma", "gray", luma_gray(self.maps["diffuse_albedo"]))

    def _psi(self):
        tiling = self._tiling("psi")
        specular = spec_albedo_psi(
            self.maps["diffuse_albedo"], self.config.reference, operator=self._operator("psi"), tiling=tiling
        )
        self._save_map("psi", "specular_albedo", specular)
        if tiling is not None:
            grid = plan_grid(specular.width, specular.height, tiling["patch"], tiling["stride"])
            self._flags("psi", seam_ratio=seam_metric(specular, grid).ratio)

    def _rho(self):
        normals = spec_normals_rho(
            self.maps["gray"], self.maps["normals_tangent"], self.config.reference,
            operator=self._operator("rho"), tiling=self._tiling("rho"),
        )
        self._save_map("rho", "specular_normals", normals)

    def _sigma(self):
        normals = diff_normals_sigma(
            self.maps["gray"], self.maps["normals_object"], self.config.reference,
            operator=self._operator("sigma"), tiling=self._tiling("sigma"),
        )
        self._save_map("sigma", "diffuse_normals", normals)

    def _displacement(self):
        result = displacement_from_normals(
            self.maps["specular_normals"], self.config.reference.nz_min, workers=self.config.workers
        )
        self._save_map("displacement", "displacement", result.displacement)
        self._flags(
            "displacement", residual=result.residual, iterations=result.iterations,
            components=result.components,
        )

    def _emboss(self):
        base = subdivide(self.meshes["mesh"], self.config.subdivision)
        embossed, fallbacks = emboss(base, self.maps["displacement"], self.config.emboss_scale)
        path = save_obj(embossed, self.output_dir / "embossed.obj")
        self.manifest.record_file("emboss", "embossed", path, kind=MESH_KIND)
        self.meshes["embossed"] = embossed
        self._flags("emboss", vertices=embossed.n_vertices, fallbacks=fallbacks)

    def _render(self):
        shading = self.config.shading
        if not shading.views:
            logger.info("No views requested; skipping renders")
            return
        mesh = self.meshes["embossed"]
        refl = self.result.reflectance()
        cameras = orbit_cameras(mesh, shading.render_size, shading.render_size, shading.views)
        for rig_config in [self.config.rig] + list(self.config.render_rigs):
            rig = self._capture_rig() if rig_config is self.config.rig else rig_config.to_rig(self.base_dir)
            views = render_views(mesh, refl, rig, cameras, self.params, self.config.seed)
            self.result.renders[rig_config.name] = views
            for view, rendered in views.items():
                name = f"{rig_config.name}_{view}"
                image = rendered.image
                radiance = RasterMap(image.radiance, ColorSpace.RAW, MapKind.SHADING, image.mask)
                path = save_raster(radiance, self.output_dir / RENDERS_DIR / f"{name}.rmap")
                self.manifest.record_map("render", name, radiance, path)
                display = RasterMap(to_display(image), ColorSpace.SRGB, MapKind.TEXTURE, image.mask)
                png = save_raster(display, self.output_dir / RENDERS_DIR / f"{name}.png", bits=8)
                self.manifest.record_file("render", f"{name}_png", png, kind="render")

    def _evaluate(self):
        """
        Rebake check on reliable texels, plus PSNR against a known albedo when configured

        Reliable texels are covered, lit with min-channel irradiance of at least
        max(epsilon, 0.05), unsaturated in the texture and not in a cast shadow.
        """
        texture_hat = self.maps["texture_hat"]
        albedo = self.maps["diffuse_albedo"]
        components = self._capture_components()
        w, h = texture_hat.resolution

        threshold = max(self.config.reference.epsilon, EVAL_MIN_IRRADIANCE)
        reliable = components.mask & texture_hat.validity() & albedo.validity()
        reliable &= components.irradiance.data.min(axis=2) >= threshold
        reliable &= ~np.any(texture_hat.data >= 1.0 - 1e-6, axis=2)
        reliable &= ~shadow_mask(self.meshes["mesh"], self._capture_rig(), w, h, self.params, self.config.seed)

        report = MetricReport(flags={"reliable_texels": int(reliable.sum())})
        for stage in ("delta", "displacement", "emboss"):
            record = self.manifest.stages.get(stage)
            if record is not None:
                report.flags.update({f"{stage}_{k}": v for k, v in record.flags.items()})

        rebaked = srgb_encode(compose_bake(srgb_decode(albedo.data.astype(np.float64)), components))
        report.add("rebake", texture_hat.with_data(rebaked.astype(np.float32)), texture_hat, reliable)

        if self.config.truth_albedo_path:
            truth = load_raster(_resolve(self.config.truth_albedo_path, self.base_dir), MapKind.DIFFUSE_ALBEDO)
            estimate = albedo.with_data(albedo.data, valid=reliable)
            if truth.resolution != estimate.resolution:
                factor = estimate.width // max(truth.width, 1)
                if factor < 1 or (truth.width * factor, truth.height * factor) != estimate.resolution:
                    raise MetricError(
                        f"Truth albedo {truth.width}x{truth.height} does not divide the output "
                        f"{estimate.width}x{estimate.height}"
                    )
                estimate = box_downsample(estimate, factor)
            report.add("diffuse_albedo", estimate, truth)

        self.result.report = report
        self.manifest.metrics = report.to_dict()
        for fmt, suffix in (("json", "json"), ("markdown", "md"), ("toon", "toon")):
            path = self.output_dir / f"metrics.{suffix}"
            path.write_text(format_report(report, fmt) + "\n")
            self.manifest.record_file("evaluate", f"metrics_{suffix}", path, kind="report")
        logger.info(f"Evaluation: min PSNR {report.min_psnr:.2f} dB over {int(reliable.sum())} texels")


def run_pipeline(
    config: PipelineConfig, base_dir: Optional[Path] = None, from_stage: Optional[str] = None
) -> PipelineResult:
    """Run the pipeline for a configuration (see PipelineRunner.run)"""
    return PipelineRunner(config, base_dir).run(from_stage)
