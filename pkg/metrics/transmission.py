"""Physical plausibility of estimated transmission maps."""
from typing import Union

import numpy as np

from utils.errors import DimensionError, DomainError, UndefinedMetricError

CHANNELS = {"R": 0, "G": 1, "B": 2}


def _channel_index(channel: Union[str, int]) -> int:
    if isinstance(channel, str):
        try:
            return CHANNELS[channel.upper()]
        except KeyError:
            raise DimensionError(f"unknown channel {channel!r}, expected one of R, G, B")
    if channel not in (0, 1, 2):
        raise DimensionError(f"channel index must be 0, 1 or 2, got {channel}")
    return int(channel)


def pcc_transmission(t: np.ndarray, depth: np.ndarray, channel: Union[str, int] = "R") -> float:
    """Pearson correlation between -ln t^channel and depth.
    
    Under t = exp(-beta d) a perfect estimate scores +1.
    
    Args:
        t: Transmission maps, (H, W, 3), strictly positive
        depth: Depth map, (H, W)
        channel: "R", "G", "B" or channel index
        
    Returns:
        Correlation in [-1, 1]
    """
    t = np.asarray(t, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    index = _channel_index(channel)
    if t.ndim != 3 or t.shape[2] != 3 or t.shape[:2] != depth.shape:
        raise DimensionError(f"transmission {t.shape} does not match depth {depth.shape}")
    if np.any(t[:, :, index] <= 0):
        raise DomainError("transmission must be strictly positive")
    
    x = -np.log(t[:, :, index]).ravel()
    y = depth.ravel()
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("correlation undefined: zero variance in transmission or depth")
    return float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))
