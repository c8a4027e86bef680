"""Dark channel prior (DCP) and underwater dark channel prior (UDCP).

Both estimate the IFM parameters (t, A) from a single image. UDCP drops
the red channel from the dark-channel minimum because red light is
absorbed first under water.
"""
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import ndimage

from formation.image_formation import DEFAULT_T_FLOOR, as_image
from priors.guided_filter import guided_filter
from utils.errors import ParameterError
from utils.logger import setup_logger

logger = setup_logger(__name__)

ALL_CHANNELS = (0, 1, 2)
GREEN_BLUE = (1, 2)
MIN_AMBIENT = 1e-6


@dataclass
class PriorEstimate:
    """IFM parameters estimated by a prior."""
    
    t: np.ndarray
    a: np.ndarray
    method: str
    flags: Dict[str, object] = field(default_factory=dict)


def dark_channel(
    img: np.ndarray,
    patch: int,
    channels: Sequence[int] = ALL_CHANNELS,
) -> np.ndarray:
    """Compute the dark channel.
    
    Args:
        img: Image, (H, W, 3)
        patch: Odd window size
        channels: Channels taking part in the minimum
        
    Returns:
        (H, W) map of the windowed minimum of the channel minimum
    """
    if patch < 1 or patch % 2 == 0:
        raise ParameterError(f"patch must be odd and >= 1, got {patch}")
    img = as_image(img)
    channel_min = np.min(img[:, :, list(channels)], axis=2)
    return ndimage.minimum_filter(channel_min, size=patch, mode="nearest")


def estimate_ambient_light(
    img: np.ndarray,
    dark: np.ndarray,
    top_frac: float,
) -> np.ndarray:
    """Mean color of the brightest `top_frac` pixels of the dark channel."""
    num_pixels = dark.size
    num_brightest = max(int(np.ceil(num_pixels * top_frac)), 1)
    # stable sort keeps the selection deterministic on ties
    indices = np.argsort(dark.ravel(), kind="stable")[-num_brightest:]
    return img.reshape(num_pixels, 3)[indices].mean(axis=0)


def _estimate(
    img: np.ndarray,
    channels: Tuple[int, ...],
    method: str,
    patch: int,
    omega: float,
    top_frac: float,
    t_floor: float,
    gf_radius: int,
    gf_eps: float,
    refine: bool,
) -> PriorEstimate:
    if not 0.0 < omega <= 1.0:
        raise ParameterError(f"omega must be in (0, 1], got {omega}")
    if not 0.0 < top_frac <= 1.0:
        raise ParameterError(f"top_frac must be in (0, 1], got {top_frac}")
    if not 0.0 < t_floor < 1.0:
        raise ParameterError(f"t_floor must be in (0, 1), got {t_floor}")
    img = as_image(img)
    flags: Dict[str, object] = {}
    
    dark = dark_channel(img, patch, channels)
    a = estimate_ambient_light(img, dark, top_frac)
    zero_components = [c for c in range(3) if a[c] <= 0.0]
    if zero_components:
        logger.warning(f"{method}: ambient light component(s) {zero_components} are zero, using {MIN_AMBIENT}")
        a[zero_components] = MIN_AMBIENT
        flags["zero_ambient_channels"] = zero_components
    
    t_raw = 1.0 - omega * dark_channel(img / a, patch, channels)
    t_raw = np.clip(t_raw, t_floor, 1.0)
    if refine:
        guide = img.mean(axis=2)
        t_raw = np.clip(guided_filter(guide, t_raw, gf_radius, gf_eps), t_floor, 1.0)
    
    t = np.repeat(t_raw[:, :, None], 3, axis=2)
    return PriorEstimate(t=t, a=np.clip(a, 0.0, 1.0), method=method, flags=flags)


def dcp_estimate(
    img: np.ndarray,
    patch: int = 15,
    omega: float = 0.95,
    top_frac: float = 0.001,
    t_floor: float = DEFAULT_T_FLOOR,
    gf_radius: int = 40,
    gf_eps: float = 1e-3,
    refine: bool = True,
) -> PriorEstimate:
    """Estimate (t, A) with the dark channel prior.
    
    Args:
        img: Degraded image, (H, W, 3)
        patch: Dark channel window size (odd)
        omega: Haze retention factor in (0, 1]
        top_frac: Fraction of dark-channel-brightest pixels averaged for A
        t_floor: Lower clamp for the transmission
        gf_radius: Guided filter radius
        gf_eps: Guided filter regularization
        refine: Apply guided-filter refinement
        
    Returns:
        PriorEstimate with identical transmission in all channels
    """
    return _estimate(img, ALL_CHANNELS, "dcp", patch, omega, top_frac, t_floor, gf_radius, gf_eps, refine)


def udcp_estimate(
    img: np.ndarray,
    patch: int = 15,
    omega: float = 0.95,
    top_frac: float = 0.001,
    t_floor: float = DEFAULT_T_FLOOR,
    gf_radius: int = 40,
    gf_eps: float = 1e-3,
    refine: bool = True,
) -> PriorEstimate:
    """Estimate (t, A) with the underwater dark channel prior (G, B only)."""
    return _estimate(img, GREEN_BLUE, "udcp", patch, omega, top_frac, t_floor, gf_radius, gf_eps, refine)
