"""Direct enhancers that do not model the IFM: HE, multi-scale Retinex, gray world."""
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from formation.image_formation import as_image
from utils.errors import ParameterError
from utils.logger import setup_logger

logger = setup_logger(__name__)

RETINEX_SCALES = (15.0, 80.0, 250.0)
RETINEX_EPS = 1e-6
GRAY_WORLD_TARGET = 0.5
GRAY_WORLD_MAX_GAIN = 100.0


def hist_equalize(img: np.ndarray, bins: int = 256) -> np.ndarray:
    """Global per-channel histogram equalization.
    
    Each pixel is mapped to the cumulative distribution value of its bin,
    so a constant channel maps to 1.0.
    
    Args:
        img: Image, (H, W, 3) in [0, 1]
        bins: Number of histogram bins (>= 2)
        
    Returns:
        Equalized image in [0, 1]
    """
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    img = as_image(img)
    out = np.empty_like(img)
    for c in range(3):
        levels = np.clip(np.floor(img[:, :, c] * bins), 0, bins - 1).astype(np.int64)
        hist = np.bincount(levels.ravel(), minlength=bins)
        cdf = np.cumsum(hist) / levels.size
        out[:, :, c] = cdf[levels]
    return out


def _rescale_percentiles(x: np.ndarray, low: float, high: float) -> np.ndarray:
    lo, hi = np.percentile(x, [low, high])
    # blur of a constant is only constant up to rounding
    if hi - lo <= 1e-9:
        return np.full_like(x, 0.5)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def msr_response(channel: np.ndarray, scales: Sequence[float]) -> np.ndarray:
    """Mean over scales of log(I + eps) - log(G_sigma * I + eps) for one channel."""
    log_channel = np.log(channel + RETINEX_EPS)
    response = np.zeros_like(channel)
    for sigma in scales:
        surround = ndimage.gaussian_filter(channel, sigma=sigma, mode="nearest")
        response += log_channel - np.log(surround + RETINEX_EPS)
    return response / len(scales)


def retinex_msr(
    img: np.ndarray,
    scales: Sequence[float] = RETINEX_SCALES,
    low_percentile: float = 1.0,
    high_percentile: float = 99.0,
) -> np.ndarray:
    """Multi-scale Retinex.
    
    Per channel, the log ratio between the image and its Gaussian
    surround is averaged over `scales`, then stretched to [0, 1] between
    the given percentiles. A channel with no dynamic range maps to 0.5.
    """
    if len(scales) < 1 or any(s <= 0 for s in scales):
        raise ParameterError(f"scales must be a nonempty list of positive values, got {list(scales)}")
    img = as_image(img)
    out = np.empty_like(img)
    for c in range(3):
        response = msr_response(img[:, :, c], scales)
        out[:, :, c] = _rescale_percentiles(response, low_percentile, high_percentile)
    return out


def gray_world_gains(img: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """Per-channel gains mapping each channel mean to 0.5.
    
    Returns:
        (gains, capped_channels) where capped channels hit GRAY_WORLD_MAX_GAIN
    """
    img = as_image(img)
    means = img.reshape(-1, 3).mean(axis=0)
    gains = np.full(3, GRAY_WORLD_MAX_GAIN)
    capped = []
    for c in range(3):
        if means[c] > 0 and GRAY_WORLD_TARGET / means[c] <= GRAY_WORLD_MAX_GAIN:
            gains[c] = GRAY_WORLD_TARGET / means[c]
        else:
            capped.append(c)
    if capped:
        logger.warning(f"Gray world: gain capped at {GRAY_WORLD_MAX_GAIN} for channel(s) {capped}")
    return gains, capped


def gray_world(img: np.ndarray) -> np.ndarray:
    """Gray-world white balance, clamped to [0, 1]."""
    img = as_image(img)
    gains, _ = gray_world_gains(img)
    return np.clip(img * gains, 0.0, 1.0)
