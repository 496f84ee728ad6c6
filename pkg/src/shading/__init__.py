"""Physically-based shading: lights, GGX lobe, baking and camera renders"""

from .bake import BakeComponents, bake_texture, irradiance_components, shadow_mask
from .brdf import directional_albedo, specular_lobe
from .lighting import (
    BRDFParams,
    Camera,
    LightingRig,
    PointLight,
    ReflectanceSet,
    ShadingParams,
    sky_environment,
)
from .renderer import ImageBuffer, RenderResult, orbit_cameras, render, render_views
from .shader import SurfaceSample, shade, shading_components

__all__ = [
    "BRDFParams",
    "BakeComponents",
    "Camera",
    "ImageBuffer",
    "LightingRig",
    "PointLight",
    "ReflectanceSet",
    "RenderResult",
    "ShadingParams",
    "SurfaceSample",
    "bake_texture",
    "directional_albedo",
    "irradiance_components",
    "orbit_cameras",
    "render",
    "render_views",
    "shade",
    "shading_components",
    "shadow_mask",
    "sky_environment",
    "specular_lobe",
]
