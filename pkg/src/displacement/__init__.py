"""Integration of specular normals into a displacement map"""

from .integration import (
    IntegrationResult,
    SlopeField,
    displacement_from_normals,
    gradient_field,
    integrate,
    normals_to_slopes,
    solve_displacement,
)

__all__ = [
    "IntegrationResult",
    "SlopeField",
    "displacement_from_normals",
    "gradient_field",
    "integrate",
    "normals_to_slopes",
    "solve_displacement",
]
