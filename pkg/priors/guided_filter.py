"""Edge-preserving guided filter."""
import cv2
import numpy as np


def box_filter(x: np.ndarray, radius: int) -> np.ndarray:
    """Mean over a (2r+1) x (2r+1) window with replicated borders."""
    size = 2 * radius + 1
    return cv2.boxFilter(
        x, ddepth=-1, ksize=(size, size), normalize=True, borderType=cv2.BORDER_REPLICATE
    )


def guided_filter(guide: np.ndarray, src: np.ndarray, radius: int, eps: float) -> np.ndarray:
    """Filter `src` with a gray-scale guide.
    
    Args:
        guide: Guide image, (H, W)
        src: Image to filter, (H, W)
        radius: Window radius
        eps: Regularization
        
    Returns:
        Filtered image, (H, W), float64
    """
    guide = np.ascontiguousarray(guide, dtype=np.float64)
    src = np.ascontiguousarray(src, dtype=np.float64)
    
    mean_i = box_filter(guide, radius)
    mean_p = box_filter(src, radius)
    cov_ip = box_filter(guide * src, radius) - mean_i * mean_p
    var_i = box_filter(guide * guide, radius) - mean_i * mean_i
    
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    
    mean_a = box_filter(a, radius)
    mean_b = box_filter(b, radius)
    return mean_a * guide + mean_b
