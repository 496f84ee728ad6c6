"""
Specular Lobe
GGX normal distribution with height-correlated Smith masking. The specular albedo
scales the lobe in place of a Fresnel term.
"""

import logging

import numpy as np

from ..errors import ShadingError

logger = logging.getLogger(__name__)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def ggx_distribution(cos_h: np.ndarray, alpha: float) -> np.ndarray:
    """D(h) = a^2 / (pi ((n.h)^2 (a^2 - 1) + 1)^2), zero below the surface"""
    a2 = alpha * alpha
    cos_h = np.asarray(cos_h, dtype=np.float64)
    denom = cos_h * cos_h * (a2 - 1.0) + 1.0
    return np.where(cos_h > 0.0, a2 / (np.pi * denom * denom), 0.0)


def smith_lambda(cos_theta: np.ndarray, alpha: float) -> np.ndarray:
    c2 = np.clip(np.asarray(cos_theta, dtype=np.float64) ** 2, 1e-12, 1.0)
    tan2 = (1.0 - c2) / c2
    return 0.5 * (-1.0 + np.sqrt(1.0 + alpha * alpha * tan2))


def smith_g2(cos_v: np.ndarray, cos_l: np.ndarray, alpha: float) -> np.ndarray:
    """Height-correlated masking-shadowing 1 / (1 + L(v) + L(l))"""
    return 1.0 / (1.0 + smith_lambda(cos_v, alpha) + smith_lambda(cos_l, alpha))


def specular_lobe(normals: np.ndarray, light_dirs: np.ndarray, view_dirs: np.ndarray, alpha: float) -> np.ndarray:
    """
    f = D G2 / (4 (n.l) (n.v)) for unit vectors broadcast over the last axis

    Returns zero where either direction lies below the surface.
    """
    cos_l = _dot(normals, light_dirs)
    cos_v = _dot(normals, view_dirs)
    half = light_dirs + view_dirs
    half = half / np.maximum(np.linalg.norm(half, axis=-1, keepdims=True), 1e-12)
    cos_h = _dot(normals, half)
    live = (cos_l > 0.0) & (cos_v > 0.0)
    safe_l = np.where(live, cos_l, 1.0)
    safe_v = np.where(live, cos_v, 1.0)
    f = ggx_distribution(cos_h, alpha) * smith_g2(safe_v, safe_l, alpha) / (4.0 * safe_l * safe_v)
    return np.where(live, f, 0.0)


def directional_albedo(alpha: float, cos_view: float, grid: int = 64) -> float:
    """
    Hemispherical integral of f * cos for one view direction

    Half vectors are drawn from D(h) cos(h) on a grid x grid midpoint lattice, so
    each sample contributes G2 (v.h) / ((n.h)(n.v)) when the reflected direction
    stays above the surface.
    """
    if not 0.0 < alpha <= 1.0:
        raise ShadingError(f"Roughness must lie in (0, 1], got {alpha}")
    if not 0.0 < cos_view <= 1.0:
        raise ShadingError(f"cos_view must lie in (0, 1], got {cos_view}")
    xi = (np.arange(grid) + 0.5) / grid
    x1, x2 = np.meshgrid(xi, xi, indexing="ij")
    cos_h = np.sqrt((1.0 - x1) / (1.0 + (alpha * alpha - 1.0) * x1))
    sin_h = np.sqrt(np.maximum(1.0 - cos_h * cos_h, 0.0))
    phi = 2.0 * np.pi * x2
    h = np.stack([sin_h * np.cos(phi), sin_h * np.sin(phi), cos_h], axis=-1)

    v = np.array([np.sqrt(1.0 - cos_view * cos_view), 0.0, cos_view])
    v_dot_h = h @ v
    light = 2.0 * v_dot_h[..., None] * h - v
    cos_l = light[..., 2]
    live = (cos_l > 0.0) & (v_dot_h > 0.0)
    g2 = smith_g2(cos_view, np.where(live, cos_l, 1.0), alpha)
    terms = np.where(live, g2 * v_dot_h / (cos_h * cos_view), 0.0)
    return float(terms.mean())
