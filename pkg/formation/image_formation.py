"""Underwater image formation model (IFM).

    I^c(x) = J^c(x) t^c(x) + (1 - t^c(x)) A^c,    t^c(x) = exp(-beta^c d(x))

Images and transmission maps are (H, W, 3) float arrays with channel
order R, G, B; ambient light and attenuation coefficients are 3-vectors
broadcast over all pixels. Arithmetic runs in float64.
"""
from typing import Sequence, Union

import numpy as np

from utils.errors import DimensionError, DomainError, ParameterError

DEFAULT_T_FLOOR = 0.05

Vector3 = Union[Sequence[float], np.ndarray]


def as_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate an (H, W, 3) image array and return it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def as_vector3(values: Vector3, name: str = "vector") -> np.ndarray:
    """Validate a per-channel 3-vector and return it as float64."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise DimensionError(f"{name} must have 3 components, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def degrade(clean: np.ndarray, t: np.ndarray, a: Vector3) -> np.ndarray:
    """Apply the IFM to a clean image.
    
    Args:
        clean: Clean image J, (H, W, 3) in [0, 1]
        t: Transmission maps, (H, W, 3) in (0, 1]
        a: Ambient light, 3-vector in [0, 1]
        
    Returns:
        Degraded image I clamped to [0, 1]
    """
    clean = as_image(clean, "clean")
    t = as_image(t, "transmission")
    _check_same_shape(clean, t, "degrade")
    a = as_vector3(a, "ambient light")
    
    degraded = clean * t + (1.0 - t) * a
    return np.clip(degraded, 0.0, 1.0)


def enhance(
    degraded: np.ndarray,
    t: np.ndarray,
    a: Vector3,
    t_floor: float = DEFAULT_T_FLOOR,
) -> np.ndarray:
    """Invert the IFM.
    
    Args:
        degraded: Degraded image I, (H, W, 3)
        t: Transmission maps, (H, W, 3)
        a: Ambient light, 3-vector
        t_floor: Lower bound applied to t before division, in (0, 1)
        
    Returns:
        Restored image J clamped to [0, 1]
    """
    if not 0.0 < t_floor < 1.0:
        raise ParameterError(f"t_floor must be in (0, 1), got {t_floor}")
    degraded = as_image(degraded, "degraded")
    t = as_image(t, "transmission")
    _check_same_shape(degraded, t, "enhance")
    a = as_vector3(a, "ambient light")
    
    t_safe = np.maximum(t, t_floor)
    restored = (degraded - (1.0 - t_safe) * a) / t_safe
    return np.clip(restored, 0.0, 1.0)


def transmission_from_depth(depth: np.ndarray, beta: Vector3) -> np.ndarray:
    """Per-channel transmission t^c = exp(-beta^c d).
    
    Args:
        depth: Depth map, (H, W), nonnegative
        beta: Attenuation coefficients, 3-vector, nonnegative
        
    Returns:
        Transmission maps, (H, W, 3) in (0, 1]
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise DimensionError(f"depth must be 2-D, got shape {depth.shape}")
    if not np.all(np.isfinite(depth)):
        raise DomainError("depth contains non-finite values")
    if np.any(depth < 0):
        raise DomainError("depth must be nonnegative")
    beta = as_vector3(beta, "beta")
    if np.any(beta < 0):
        raise DomainError(f"beta must be nonnegative, got {beta}")
    
    t = np.exp(-depth[:, :, None] * beta[None, None, :])
    # exp underflows to 0 for very deep pixels
    return np.maximum(t, np.finfo(np.float64).tiny)


def synth_degrade(i1: np.ndarray, a1: Vector3, alpha: float) -> np.ndarray:
    """Re-degrade an image towards its ambient light.
    
    I2 = alpha * I1 + (1 - alpha) * A1. When I1 follows the IFM with
    transmission t, I2 follows it with transmission alpha * t.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    i1 = as_image(i1, "image")
    a1 = as_vector3(a1, "ambient light")
    return np.clip(alpha * i1 + (1.0 - alpha) * a1, 0.0, 1.0)
