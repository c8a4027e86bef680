"""Image and depth-map file I/O.

Images are decoded to float64 RGB arrays in [0, 1] by dividing by 255
(no gamma handling) and written back as 8-bit PNG.
"""
import os
from typing import Tuple

import cv2
import numpy as np

from utils.errors import ImageLoadError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
DEPTH_EXTENSIONS = (".npy",) + IMAGE_EXTENSIONS


def read_image(path: str) -> np.ndarray:
    """Read an RGB image as float64 in [0, 1].
    
    Args:
        path: Path to a PNG/JPEG/BMP file
        
    Returns:
        Array of shape (H, W, 3), channel order R, G, B
    """
    data = cv2.imread(path, cv2.IMREAD_COLOR)
    if data is None:
        raise ImageLoadError(f"Could not decode image: {path}")
    return cv2.cvtColor(data, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] image to 8 bits."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path: str, img: np.ndarray) -> None:
    """Write an RGB (or single-channel) [0, 1] image as 8-bit PNG."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    data = to_uint8(img)
    if data.ndim == 3:
        data = cv2.cvtColor(data, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(path, data):
        raise ImageLoadError(f"Could not write image: {path}")


def read_depth(path: str) -> np.ndarray:
    """Read a depth map.
    
    `.npy` files are loaded as-is; image files are read unchanged (8 or
    16 bit) and the first channel is used as raw distance values.
    """
    if path.lower().endswith(".npy"):
        try:
            depth = np.load(path)
        except (OSError, ValueError) as e:
            raise ImageLoadError(f"Could not load depth map {path}: {e}")
    else:
        depth = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if depth is None:
            raise ImageLoadError(f"Could not decode depth map: {path}")
        if depth.ndim == 3:
            depth = depth[:, :, 0]
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ImageLoadError(f"Depth map {path} must be 2-D, got shape {depth.shape}")
    return depth


def write_depth(path: str, depth: np.ndarray) -> None:
    """Write a depth map as float64 `.npy`."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.save(path, np.asarray(depth, dtype=np.float64))


def image_size(path: str) -> Tuple[int, int]:
    """Return (height, width) of an image or depth file."""
    if path.lower().endswith(".npy"):
        return read_depth(path).shape
    return read_image(path).shape[:2]


def resize_image(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinearly resize an image or map to size x size."""
    return cv2.resize(img, (size, size), interpolation=cv2.INTER_LINEAR)


def resize_to(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinearly resize an image or map to (height, width)."""
    return cv2.resize(img, (width, height), interpolation=cv2.INTER_LINEAR)
