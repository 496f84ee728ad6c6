"""
Lighting and Viewing
Point lights, lighting rigs, cameras, shading parameters and the reflectance
bundle consumed by the shader.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ShadingError
from ..raster.maps import ColorSpace, MapKind, RasterMap
from .sampling import STREAM_LIGHT_JITTER, generator

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ShadingError(f"{name} must be a finite 3-vector, got {value!r}")
    return arr


@dataclass(frozen=True)
class PointLight:
    """Isotropic point light with RGB radiant intensity"""

    position: Vec3
    intensity: Vec3

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(_vec3(self.position, "Light position")))
        intensity = _vec3(self.intensity, "Light intensity")
        if np.any(intensity < 0):
            raise ShadingError(f"Light intensity must be >= 0, got {tuple(intensity)}")
        object.__setattr__(self, "intensity", tuple(intensity))


@dataclass(frozen=True, eq=False)
class LightingRig:
    """
    Environment plus point lights

    Attributes:
        environment: Optional linear lat-long radiance map (row 0 looks up, +Y)
        point_lights: Light sources
        jitter_sigma: Std-dev of the per-bake light position jitter (model units)
        seed: Seed recorded with the rig
        env_scale: Radiance multiplier applied to the environment map
        env_uniform: Constant RGB radiance used when no environment map is given
    """

    environment: Optional[RasterMap] = None
    point_lights: Tuple[PointLight, ...] = ()
    jitter_sigma: float = 0.0
    seed: int = 0
    env_scale: float = 1.0
    env_uniform: Optional[Vec3] = None

    def __post_init__(self):
        object.__setattr__(self, "point_lights", tuple(self.point_lights))
        if self.environment is not None:
            if self.environment.colorspace != ColorSpace.LINEAR:
                raise ShadingError(
                    f"Environment must be linear-tagged, got '{self.environment.colorspace.value}'"
                )
            if self.environment.channels != 3:
                raise ShadingError("Environment map must have 3 channels")
        if self.env_uniform is not None:
            uniform = _vec3(self.env_uniform, "Uniform environment")
            if np.any(uniform < 0):
                raise ShadingError("Uniform environment radiance must be >= 0")
            object.__setattr__(self, "env_uniform", tuple(uniform))
        if self.jitter_sigma < 0:
            raise ShadingError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.env_scale < 0:
            raise ShadingError(f"env_scale must be >= 0, got {self.env_scale}")

    @property
    def has_environment(self) -> bool:
        if self.env_scale == 0:
            return False
        if self.environment is not None:
            return True
        return self.env_uniform is not None and any(self.env_uniform)

    @property
    def xi_compatible(self) -> bool:
        return len(self.point_lights) == 3

    def environment_radiance(self, directions: np.ndarray) -> np.ndarray:
        """
        Radiance arriving from each direction (nearest lat-long texel)

        Args:
            directions: (..., 3) unit vectors

        Returns:
            (..., 3) linear radiance
        """
        shape = directions.shape[:-1]
        if not self.has_environment:
            return np.zeros(shape + (3,))
        if self.environment is None:
            return np.broadcast_to(np.asarray(self.env_uniform) * self.env_scale, shape + (3,))
        env = self.environment
        u = 0.5 + np.arctan2(directions[..., 0], directions[..., 2]) / (2.0 * np.pi)
        v = np.arccos(np.clip(directions[..., 1], -1.0, 1.0)) / np.pi
        cols = np.clip((u * env.width).astype(np.int64), 0, env.width - 1)
        rows = np.clip((v * env.height).astype(np.int64), 0, env.height - 1)
        return env.data[rows, cols].astype(np.float64) * self.env_scale

    def scaled(self, factor: float) -> "LightingRig":
        """Rig with every light and the environment multiplied by ``factor``"""
        lights = tuple(
            PointLight(light.position, tuple(np.asarray(light.intensity) * factor))
            for light in self.point_lights
        )
        return replace(self, point_lights=lights, env_scale=self.env_scale * factor)

    def jittered(self, seed: int) -> "LightingRig":
        """Rig with light positions offset once by N(0, jitter_sigma)"""
        if self.jitter_sigma == 0 or not self.point_lights:
            return self
        rng = generator(seed, STREAM_LIGHT_JITTER)
        offsets = rng.normal(0.0, self.jitter_sigma, size=(len(self.point_lights), 3))
        lights = tuple(
            PointLight(tuple(np.asarray(light.position) + offset), light.intensity)
            for light, offset in zip(self.point_lights, offsets)
        )
        return replace(self, point_lights=lights)

    @classmethod
    def studio(cls, seed: int = 0, jitter_sigma: float = 0.0, sky: bool = True) -> "LightingRig":
        """Three frontal-ish point lights and an optional sky-gradient environment"""
        lights = (
            PointLight((1.6, 1.2, 3.2), (5.0, 4.8, 4.5)),
            PointLight((-2.2, 0.4, 2.8), (2.5, 2.6, 2.8)),
            PointLight((0.0, 3.0, 1.8), (1.5, 1.5, 1.5)),
        )
        environment = sky_environment() if sky else None
        return cls(environment=environment, point_lights=lights, jitter_sigma=jitter_sigma, seed=seed)

    @classmethod
    def uniform(cls, radiance: float = 1.0, seed: int = 0) -> "LightingRig":
        """Constant environment radiance and no point lights"""
        return cls(env_uniform=(radiance, radiance, radiance), seed=seed)


def sky_environment(width: int = 64, height: int = 32, zenith: float = 0.35, ground: float = 0.05) -> RasterMap:
    """Analytic sky gradient: bright above the horizon, dim below"""
    elevation = 0.5 - (np.arange(height) + 0.5) / height
    weight = np.clip(0.5 + elevation * 2.0, 0.0, 1.0)
    column = ground + (zenith - ground) * weight
    tint = np.array([0.9, 0.95, 1.0])
    data = np.broadcast_to(column[:, None, None] * tint, (height, width, 3))
    return RasterMap(data=data.copy(), colorspace=ColorSpace.LINEAR, kind=MapKind.TEXTURE)


@dataclass(frozen=True)
class BRDFParams:
    """GGX lobe parameters; the roughness is the GGX alpha and is spatially constant"""

    roughness: float = 0.35

    def __post_init__(self):
        if not 0.0 < self.roughness <= 1.0:
            raise ShadingError(f"Roughness must lie in (0, 1], got {self.roughness}")


@dataclass(frozen=True)
class ShadingParams:
    """Render/bake parameters"""

    brdf: BRDFParams = field(default_factory=BRDFParams)
    env_samples: int = 1024
    shadows: bool = True
    shadow_grid: int = 256
    shadow_epsilon: float = 1e-4  # times the bounding radius
    bake_specular_albedo: float = 0.25
    bake_view: Vec3 = (0.0, 0.0, 1.0)
    workers: int = 1

    def __post_init__(self):
        root = math.isqrt(self.env_samples) if self.env_samples > 0 else 0
        if self.env_samples < 1 or root * root != self.env_samples:
            raise ShadingError(f"env_samples must be a positive perfect square, got {self.env_samples}")
        if not 0.0 <= self.bake_specular_albedo <= 1.0:
            raise ShadingError("bake_specular_albedo must lie in [0, 1]")
        if self.shadow_grid < 1:
            raise ShadingError(f"shadow_grid must be >= 1, got {self.shadow_grid}")
        if not 0.0 < self.shadow_epsilon < 0.1:
            raise ShadingError(f"shadow_epsilon must lie in (0, 0.1), got {self.shadow_epsilon}")

    @property
    def strata(self) -> int:
        return math.isqrt(self.env_samples)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; image rows run top to bottom"""

    position: Vec3
    look_at: Vec3
    up: Vec3 = (0.0, 1.0, 0.0)
    vertical_fov: float = math.radians(30.0)
    width: int = 256
    height: int = 256
    near: float = 1e-3

    def __post_init__(self):
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, tuple(_vec3(getattr(self, name), f"Camera {name}")))
        if not 0.0 < self.vertical_fov < math.pi:
            raise ShadingError(f"vertical_fov must lie in (0, pi), got {self.vertical_fov}")
        if self.width < 1 or self.height < 1:
            raise ShadingError(f"Invalid image size {self.width}x{self.height}")
        forward = np.asarray(self.look_at) - np.asarray(self.position)
        if np.linalg.norm(forward) == 0:
            raise ShadingError("Camera position and look_at coincide")
        if np.linalg.norm(np.cross(forward, self.up)) < 1e-9 * np.linalg.norm(forward):
            raise ShadingError("Camera up vector is parallel to the view direction")

    def basis(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, up, forward) orthonormal camera axes"""
        forward = np.asarray(self.look_at) - np.asarray(self.position)
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        right /= np.linalg.norm(right)
        return right, np.cross(right, forward), forward

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Project object-space points to continuous pixel coordinates

        Returns:
            ((n, 2) pixel coordinates, (n,) depth along the view axis)
        """
        right, up, forward = self.basis()
        rel = np.asarray(points, dtype=np.float64) - np.asarray(self.position)
        x, y, z = rel @ right, rel @ up, rel @ forward
        focal = 0.5 * self.height / math.tan(0.5 * self.vertical_fov)
        safe = np.where(np.abs(z) > 1e-12, z, 1e-12)
        px = 0.5 * self.width + focal * x / safe
        py = 0.5 * self.height - focal * y / safe
        return np.stack([px, py], axis=1), z

    @classmethod
    def orbit(
        cls,
        centre: Sequence[float],
        distance: float,
        azimuth_deg: float = 0.0,
        elevation_deg: float = 0.0,
        vertical_fov: float = math.radians(30.0),
        width: int = 256,
        height: int = 256,
    ) -> "Camera":
        """Camera on a sphere around ``centre``; azimuth 0 looks from +Z"""
        az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
        offset = distance * np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])
        centre = np.asarray(centre, dtype=np.float64)
        return cls(
            position=tuple(centre + offset), look_at=tuple(centre), vertical_fov=vertical_fov,
            width=width, height=height,
        )


@dataclass(frozen=True, eq=False)
class ReflectanceSet:
    """
    Maps needed to render a subject

    Attributes:
        diffuse_albedo: A_D, 3-channel srgb or linear
        specular_albedo: A_S, 1 or 3 channels
        diffuse_normals: N_D, object-space unless ``diffuse_space`` is "tangent"
        specular_normals: N_S, tangent space
        displacement: Optional integrated displacement
    """

    diffuse_albedo: RasterMap
    specular_albedo: RasterMap
    diffuse_normals: RasterMap
    specular_normals: RasterMap
    displacement: Optional[RasterMap] = None
    diffuse_space: str = "object"

    def __post_init__(self):
        maps = [self.diffuse_albedo, self.specular_albedo, self.diffuse_normals, self.specular_normals]
        if self.displacement is not None:
            maps.append(self.displacement)
        resolutions = {m.resolution for m in maps}
        if len(resolutions) != 1:
            raise ShadingError(f"Reflectance maps differ in resolution: {sorted(resolutions)}")
        if self.diffuse_albedo.channels != 3:
            raise ShadingError("Diffuse albedo must have 3 channels")
        if self.diffuse_albedo.colorspace not in (ColorSpace.SRGB, ColorSpace.LINEAR):
            raise ShadingError("Diffuse albedo must be srgb or linear")
        if self.specular_albedo.channels not in (1, 3):
            raise ShadingError("Specular albedo must have 1 or 3 channels")
        for normals in (self.diffuse_normals, self.specular_normals):
            if not normals.kind.is_normals:
                raise ShadingError(f"Expected a normal map, got '{normals.kind.value}'")
        if self.diffuse_space not in ("object", "tangent"):
            raise ShadingError(f"diffuse_space must be 'object' or 'tangent', got {self.diffuse_space!r}")

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.diffuse_albedo.resolution
