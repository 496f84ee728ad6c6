"""
Configuration Module
Centralized configuration for the reflectance pipeline: inputs, lighting rigs,
operator backends, tiling, shading and the reference operator constants.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigError

logger = logging.getLogger(__name__)

STAGES = ("zeta", "delta", "psi", "rho", "sigma")
BACKENDS = ("reference", "external")
VIEWS = ("frontal", "left", "right")


def _strict(cls, data: Dict[str, Any], where: str) -> Dict[str, Any]:
    """Reject keys that are not fields of ``cls``"""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return data


@dataclass
class ReferenceOperatorParams:
    """
    Constants of the analytic reference operators

    Provides the knobs of:
    - psi: specular albedo from a high-pass of the albedo luma
    - rho: specular normals from the luma gradient
    - sigma: diffuse normals from blurred shape normals
    - delta: low-irradiance threshold
    - integration: minimum n_z of usable normals
    """

    # ==================== psi ====================
    s0: float = 0.3  # base specular albedo
    kappa: float = 1.0  # occlusion strength of high-frequency detail
    sigma_b: float = 4.0  # texels
    highpass_scale: float = 0.1  # |high-pass| mapped to H = 1

    # ==================== rho ====================
    beta: float = 0.8
    rho_sigma: float = 1.0  # texels; pre-smoothing of the luma

    # ==================== sigma ====================
    gamma: float = 0.2
    sigma_d: float = 6.0  # texels

    # ==================== delta / integration ====================
    epsilon: float = 0.02
    nz_min: float = 0.1

    def __post_init__(self):
        for name in ("s0", "kappa", "sigma_b", "highpass_scale", "beta", "rho_sigma", "gamma", "sigma_d"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.s0 <= 1.0:
            raise ConfigError(f"s0 must lie in [0, 1], got {self.s0}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.nz_min < 1.0:
            raise ConfigError(f"nz_min must lie in (0, 1), got {self.nz_min}")

    @property
    def equivariance_margin(self) -> int:
        """Border width (texels) outside which reference outputs shift with their input"""
        return int(math.ceil(3 * max(self.sigma_b, self.sigma_d, self.rho_sigma))) + 2


@dataclass
class RigConfig:
    """
    Lighting rig description

    ``preset`` selects a built-in rig ("studio", "uniform"); otherwise ``lights``
    lists {"pos": [x, y, z], "intensity": [r, g, b]} entries and ``env_path``
    names a linear lat-long float raster.
    """

    name: str = "studio"
    preset: Optional[str] = "studio"
    env_path: Optional[str] = None
    env_scale: float = 1.0
    env_uniform: Optional[float] = None
    lights: List[Dict[str, List[float]]] = field(default_factory=list)
    jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.preset not in (None, "studio", "uniform"):
            raise ConfigError(f"Unknown rig preset '{self.preset}'")
        for i, light in enumerate(self.lights):
            if set(light) != {"pos", "intensity"}:
                raise ConfigError(f"rig '{self.name}' light {i}: expected keys pos, intensity")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "rig") -> "RigConfig":
        return cls(**_strict(cls, data, where))

    def to_rig(self, base_dir: Optional[Path] = None):
        """Build the LightingRig this entry describes"""
        from .raster.io import load_raster
        from .raster.maps import MapKind
        from .shading.lighting import LightingRig, PointLight

        if self.preset == "studio" and not self.lights:
            rig = LightingRig.studio(seed=self.seed, jitter_sigma=self.jitter_sigma)
            return LightingRig(
                environment=rig.environment, point_lights=rig.point_lights, jitter_sigma=self.jitter_sigma,
                seed=self.seed, env_scale=self.env_scale,
            )
        if self.preset == "uniform" and not self.lights:
            radiance = 1.0 if self.env_uniform is None else self.env_uniform
            return LightingRig(env_uniform=(radiance,) * 3, seed=self.seed, env_scale=self.env_scale)

        environment = None
        if self.env_path:
            path = Path(self.env_path)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            environment = load_raster(path, MapKind.TEXTURE)
        lights = tuple(PointLight(tuple(l["pos"]), tuple(l["intensity"])) for l in self.lights)
        uniform = None if self.env_uniform is None else (self.env_uniform,) * 3
        return LightingRig(
            environment=environment, point_lights=lights, jitter_sigma=self.jitter_sigma,
            seed=self.seed, env_scale=self.env_scale, env_uniform=uniform,
        )


@dataclass
class OperatorConfig:
    """Backend selection for one translation stage"""

    backend: str = "reference"
    command: Optional[List[str]] = None
    timeout: float = 120.0
    tiled: bool = True

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"Unknown backend '{self.backend}'; choose from {list(BACKENDS)}")
        if self.backend == "external" and not self.command:
            raise ConfigError("External backend needs a command")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout}")


@dataclass
class PatchConfig:
    """Sliding-window inference layout (texels at the super-resolved size)"""

    patch: int = 192
    stride: Optional[int] = None  # defaults to patch // 2
    blend_margin: Optional[int] = None  # defaults to (patch - stride) // 2

    def __post_init__(self):
        stride = self.effective_stride
        if not self.patch >= stride >= 1:
            raise ConfigError(f"Need patch >= stride >= 1, got patch={self.patch}, stride={stride}")

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else max(self.patch // 2, 1)


@dataclass
class ShadingConfig:
    """Shading parameters for bakes, de-lighting components and renders"""

    roughness: float = 0.35
    env_samples: int = 64
    shadows: bool = True
    shadow_grid: int = 256
    shadow_epsilon: float = 1e-4
    bake_specular_albedo: float = 0.25
    render_size: int = 256
    views: List[str] = field(default_factory=lambda: list(VIEWS))

    def __post_init__(self):
        unknown = [v for v in self.views if v not in VIEWS]
        if unknown:
            raise ConfigError(f"Unknown views {unknown}; choose from {list(VIEWS)}")

    def to_params(self, workers: int = 1):
        from .shading.lighting import BRDFParams, ShadingParams

        return ShadingParams(
            brdf=BRDFParams(roughness=self.roughness),
            env_samples=self.env_samples,
            shadows=self.shadows,
            shadow_grid=self.shadow_grid,
            shadow_epsilon=self.shadow_epsilon,
            bake_specular_albedo=self.bake_specular_albedo,
            workers=workers,
        )


@dataclass
class PipelineConfig:
    """
    End-to-end pipeline configuration

    Every field is plain JSON. ``seed`` is mandatory; all randomness in a run
    derives from it.
    """

    seed: int
    mesh_path: Optional[str] = None
    texture_path: Optional[str] = None
    truth_albedo_path: Optional[str] = None
    output_dir: str = "output"
    profile: str = "desk"

    # ==================== Resolutions ====================
    texture_size: Tuple[int, int] = (144, 96)
    scale: int = 8
    any_size: bool = False
    remap_size: Optional[Tuple[int, int]] = None

    # ==================== Stages ====================
    rig: RigConfig = field(default_factory=RigConfig)
    render_rigs: List[RigConfig] = field(default_factory=list)
    operators: Dict[str, OperatorConfig] = field(default_factory=dict)
    delta_conditioning: str = "depth"
    patches: PatchConfig = field(default_factory=PatchConfig)
    shading: ShadingConfig = field(default_factory=ShadingConfig)
    reference: ReferenceOperatorParams = field(default_factory=ReferenceOperatorParams)
    emboss_scale: float = 0.001
    subdivision: int = 1
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        self.texture_size = tuple(self.texture_size)
        if self.remap_size is not None:
            self.remap_size = tuple(self.remap_size)
        for stage in STAGES:
            self.operators.setdefault(stage, OperatorConfig())
        unknown = sorted(set(self.operators) - set(STAGES))
        if unknown:
            raise ConfigError(f"Unknown operator stages {unknown}")
        if self.delta_conditioning not in ("depth", "normals"):
            raise ConfigError(f"delta_conditioning must be 'depth' or 'normals', got {self.delta_conditioning!r}")
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if self.subdivision < 0:
            raise ConfigError(f"subdivision must be >= 0, got {self.subdivision}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.patches.patch % self.scale:
            raise ConfigError(f"patch {self.patches.patch} must be a multiple of scale {self.scale}")

    # ==================== Profiles ====================

    @classmethod
    def desk_profile(cls, seed: int = 0, **overrides) -> "PipelineConfig":
        """CI scale: 144x96 input, 1152x768 maps"""
        base = dict(
            seed=seed, profile="desk", texture_size=(144, 96),
            patches=PatchConfig(patch=192, stride=96), shading=ShadingConfig(env_samples=64),
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def full_profile(cls, seed: int = 0, **overrides) -> "PipelineConfig":
        """Release scale: 576x384 input, 4608x3072 maps"""
        base = dict(
            seed=seed, profile="full", texture_size=(576, 384),
            patches=PatchConfig(patch=1536, stride=768),
            shading=ShadingConfig(env_samples=1024, shadow_grid=512, render_size=1024),
        )
        base.update(overrides)
        return cls(**base)

    @property
    def output_size(self) -> Tuple[int, int]:
        w, h = self.texture_size
        return w * self.scale, h * self.scale

    @property
    def sr_patch(self) -> int:
        """Patch size of tiled super-resolution, in input texels"""
        return self.patches.patch // self.scale

    # ==================== Validation ====================

    def validate(self, base_dir: Optional[Path] = None):
        """
        Check that every referenced file exists

        Raises:
            ConfigError: missing mesh, texture or environment file
        """
        for label, value in (("mesh_path", self.mesh_path), ("texture_path", self.texture_path)):
            if value is None:
                raise ConfigError(f"{label} is required")
            if not self._resolve(value, base_dir).exists():
                raise ConfigError(f"{label} not found: {value}")
        if self.truth_albedo_path and not self._resolve(self.truth_albedo_path, base_dir).exists():
            raise ConfigError(f"truth_albedo_path not found: {self.truth_albedo_path}")
        for rig in [self.rig] + list(self.render_rigs):
            if rig.env_path and not self._resolve(rig.env_path, base_dir).exists():
                raise ConfigError(f"rig '{rig.name}' env_path not found: {rig.env_path}")
        for stage, op in self.operators.items():
            if op.backend == "external" and not op.command:
                raise ConfigError(f"{stage}: external backend needs a command")

    @staticmethod
    def _resolve(value: str, base_dir: Optional[Path]) -> Path:
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            return base_dir / path
        return path

    # ==================== Persistence ====================

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        data = dict(_strict(cls, data, "config"))
        if "seed" not in data:
            raise ConfigError("config: 'seed' is mandatory")
        profile = data.get("profile", "desk")
        if profile not in ("desk", "full"):
            raise ConfigError(f"Unknown profile '{profile}'")

        nested = {
            "rig": lambda v: RigConfig.from_dict(v, "rig"),
            "render_rigs": lambda v: [RigConfig.from_dict(r, f"render_rigs[{i}]") for i, r in enumerate(v)],
            "operators": lambda v: {
                stage: OperatorConfig(**_strict(OperatorConfig, op, f"operators.{stage}"))
                for stage, op in _strict_stages(v).items()
            },
            "patches": lambda v: PatchConfig(**_strict(PatchConfig, v, "patches")),
            "shading": lambda v: ShadingConfig(**_strict(ShadingConfig, v, "shading")),
            "reference": lambda v: ReferenceOperatorParams(**_strict(ReferenceOperatorParams, v, "reference")),
        }
        for key, build in nested.items():
            if key in data:
                data[key] = build(data[key])

        factory = cls.full_profile if profile == "full" else cls.desk_profile
        try:
            return factory(**data)
        except TypeError as e:
            raise ConfigError(f"config: {e}") from e

    @classmethod
    def load_from_file(cls, path: Path, **overrides) -> "PipelineConfig":
        """
        Load configuration from a JSON file

        Args:
            path: JSON file
            overrides: Top-level keys replacing the file's values before the profile is applied

        Raises:
            ConfigError: missing file, invalid JSON, unknown keys or missing seed
        """
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        config = cls.from_dict(data)
        logger.info(f"Loaded configuration from {path}")
        return config

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["texture_size"] = list(self.texture_size)
        if self.remap_size is not None:
            data["remap_size"] = list(self.remap_size)
        return data

    def save_to_file(self, path: Path):
        """
        Save the resolved configuration to a JSON file

        Args:
            path: Path where config should be saved
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as f:
                json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            logger.info(f"Configuration saved to {path}")
        except PermissionError:
            logger.error(f"Permission denied writing config to {path}")
            raise
        except OSError as e:
            logger.error(f"OS error saving config to {path}: {e}")
            raise


def _strict_stages(data: Dict[str, Any]) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError("operators: expected an object")
    unknown = sorted(set(data) - set(STAGES))
    if unknown:
        raise ConfigError(f"operators: unknown stages {unknown}")
    return data
