"""No-reference underwater quality metrics: UIQM and UCIQE.

UIQM = c1 * UICM + c2 * UISM + c3 * UIConM, computed on the 0-255
intensity scale its weights were fitted on. UCIQE combines the chroma
spread, luminance contrast and mean saturation in CIELab.
"""
from typing import Dict

import numpy as np
from scipy import ndimage
from skimage import color

from formation.image_formation import as_image

UIQM_WEIGHTS = (0.0282, 0.2953, 3.5753)
UCIQE_WEIGHTS = (0.4680, 0.2745, 0.2576)
BLOCK_SIZE = 8
TRIM_FRACTION = 0.1
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CONTRAST_FRACTION = 0.01


def trimmed_mean(x: np.ndarray, alpha_low: float = TRIM_FRACTION, alpha_high: float = TRIM_FRACTION) -> float:
    """Asymmetric alpha-trimmed mean."""
    values = np.sort(np.asarray(x, dtype=np.float64).ravel())
    k = values.size
    low = int(np.ceil(alpha_low * k))
    high = int(np.floor(alpha_high * k))
    kept = values[low:k - high]
    if kept.size == 0:
        return float(np.mean(values))
    return float(np.mean(kept))


def uicm(img255: np.ndarray) -> float:
    """Colorfulness from trimmed statistics of the RG and YB opponent channels."""
    r, g, b = img255[:, :, 0], img255[:, :, 1], img255[:, :, 2]
    rg = r - g
    yb = 0.5 * (r + g) - b
    mu_rg = trimmed_mean(rg)
    mu_yb = trimmed_mean(yb)
    var_rg = float(np.mean((rg - mu_rg) ** 2))
    var_yb = float(np.mean((yb - mu_yb) ** 2))
    return -0.0268 * np.sqrt(mu_rg ** 2 + mu_yb ** 2) + 0.1586 * np.sqrt(var_rg + var_yb)


def _sobel_magnitude(channel: np.ndarray) -> np.ndarray:
    mag = np.hypot(ndimage.sobel(channel, axis=0, mode="wrap"), ndimage.sobel(channel, axis=1, mode="wrap"))
    peak = np.max(mag)
    if peak == 0:
        return mag
    return mag * (255.0 / peak)


def _blocks(x: np.ndarray, block: int):
    rows = x.shape[0] // block
    cols = x.shape[1] // block
    for i in range(rows):
        for j in range(cols):
            yield x[i * block:(i + 1) * block, j * block:(j + 1) * block]


def eme(x: np.ndarray, block: int = BLOCK_SIZE) -> float:
    """Block enhancement measure: 2/(k1 k2) * sum log(max/min)."""
    num_blocks = (x.shape[0] // block) * (x.shape[1] // block)
    if num_blocks == 0:
        return 0.0
    total = 0.0
    for blk in _blocks(x, block):
        lo = np.min(blk)
        hi = np.max(blk)
        if lo > 0 and hi > 0:
            total += np.log(hi / lo)
    return 2.0 / num_blocks * total


def uism(img255: np.ndarray, block: int = BLOCK_SIZE) -> float:
    """Sharpness: luma-weighted EME of Sobel-weighted channels."""
    score = 0.0
    for c, weight in enumerate(LUMA_WEIGHTS):
        channel = img255[:, :, c]
        edge_map = _sobel_magnitude(channel) * channel
        score += weight * eme(edge_map, block)
    return score


def uiconm(img255: np.ndarray, block: int = BLOCK_SIZE) -> float:
    """Contrast: block logAMEE over all channels of each block."""
    num_blocks = (img255.shape[0] // block) * (img255.shape[1] // block)
    if num_blocks == 0:
        return 0.0
    total = 0.0
    for blk in _blocks(img255, block):
        lo = np.min(blk)
        hi = np.max(blk)
        top = hi - lo
        bottom = hi + lo
        if top > 0 and bottom > 0:
            ratio = top / bottom
            total += ratio * np.log(ratio)
    return -1.0 / num_blocks * total


def uiqm_components(img: np.ndarray) -> Dict[str, float]:
    """UIQM and its three components for a [0, 1] image."""
    img255 = as_image(img) * 255.0
    c1, c2, c3 = UIQM_WEIGHTS
    components = {
        "uicm": float(uicm(img255)),
        "uism": float(uism(img255)),
        "uiconm": float(uiconm(img255)),
    }
    components["uiqm"] = c1 * components["uicm"] + c2 * components["uism"] + c3 * components["uiconm"]
    return components


def uiqm(img: np.ndarray) -> float:
    """Underwater Image Quality Measure."""
    return uiqm_components(img)["uiqm"]


def uciqe_components(img: np.ndarray) -> Dict[str, float]:
    """UCIQE terms for a [0, 1] image.
    
    Lightness and chroma are divided by 100; saturation is
    chroma / sqrt(chroma^2 + L^2) (0 where both vanish); luminance
    contrast is the mean of the top 1% of L minus the mean of the bottom 1%.
    """
    img = as_image(img)
    lab = color.rgb2lab(img)
    lightness = lab[:, :, 0] / 100.0
    chroma = np.hypot(lab[:, :, 1], lab[:, :, 2]) / 100.0
    
    denom = np.hypot(chroma, lightness)
    saturation = np.divide(chroma, denom, out=np.zeros_like(chroma), where=denom > 0)
    
    ordered = np.sort(lightness.ravel())
    n = max(int(np.ceil(CONTRAST_FRACTION * ordered.size)), 1)
    contrast = float(np.mean(ordered[-n:]) - np.mean(ordered[:n]))
    
    c1, c2, c3 = UCIQE_WEIGHTS
    components = {
        "sigma_chroma": float(np.std(chroma)),
        "contrast_luminance": contrast,
        "mu_saturation": float(np.mean(saturation)),
    }
    components["uciqe"] = (
        c1 * components["sigma_chroma"]
        + c2 * components["contrast_luminance"]
        + c3 * components["mu_saturation"]
    )
    return components


def uciqe(img: np.ndarray) -> float:
    """Underwater Color Image Quality Evaluation."""
    return uciqe_components(img)["uciqe"]
