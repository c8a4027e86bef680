"""Full-reference metrics: PSNR, SSIM and reproduction angular error."""
import numpy as np
from skimage.metrics import structural_similarity

from formation.image_formation import as_image
from utils.errors import DimensionError, ParameterError, UndefinedMetricError

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MIN_NORM = 1e-8


def _pair(a: np.ndarray, b: np.ndarray):
    a = as_image(a, "first image")
    b = as_image(b, "second image")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio with peak 1.0, capped at 100 dB."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over channels."""
    a, b = _pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ParameterError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    return float(
        structural_similarity(
            a,
            b,
            data_range=1.0,
            channel_axis=2,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
    )


def angular_error(a: np.ndarray, b: np.ndarray) -> float:
    """Mean angle in degrees between corresponding RGB vectors.
    
    Pixels where either vector has norm below 1e-8 are excluded.
    """
    a, b = _pair(a, b)
    va = a.reshape(-1, 3)
    vb = b.reshape(-1, 3)
    norm_a = np.linalg.norm(va, axis=1)
    norm_b = np.linalg.norm(vb, axis=1)
    valid = (norm_a >= MIN_NORM) & (norm_b >= MIN_NORM)
    if not np.any(valid):
        raise UndefinedMetricError("angular error undefined: every pixel has a zero-norm vector")
    cosine = np.sum(va[valid] * vb[valid], axis=1) / (norm_a[valid] * norm_b[valid])
    angles = np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))
    return float(np.mean(angles))
