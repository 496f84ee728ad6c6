"""Mesh handling and UV-space geometry conditioning"""

from .conditioning import (
    TangentFrame,
    depth_map,
    object_normal_map,
    object_to_tangent,
    rasterize_attribute,
    surface_raster,
    tangent_frames,
    tangent_normal_map,
    tangent_to_object,
)
from .mesh import Mesh, emboss, shape_normals, subdivide
from .obj_io import load_obj, save_obj

__all__ = [
    "Mesh",
    "TangentFrame",
    "depth_map",
    "emboss",
    "load_obj",
    "object_normal_map",
    "object_to_tangent",
    "rasterize_attribute",
    "save_obj",
    "shape_normals",
    "subdivide",
    "surface_raster",
    "tangent_frames",
    "tangent_normal_map",
    "tangent_to_object",
]
