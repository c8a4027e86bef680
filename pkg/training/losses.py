"""IFM-inspired losses.

Squared norms are realized as means of squared errors so the default
weights do not depend on the image resolution. Enhancement inside the
losses is not clamped, to keep gradients alive.
"""
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from formation.image_formation import DEFAULT_T_FLOOR
from utils.errors import ConfigurationError, DimensionError, ParameterError

GRAY_TARGET = 0.5
BLUR_TRUNCATE = 4.0


@dataclass
class LossWeights:
    """Weights of the supervised, unsupervised and semi-supervised objectives."""
    
    lambda1: float = 0.001
    lambda2: float = 0.005
    lambda3: float = 10.0
    lambda_unsup: float = 0.001
    
    def validate(self) -> bool:
        for name in ("lambda1", "lambda2", "lambda3", "lambda_unsup"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and nonnegative, got {value}")
        return True


def _ambient(a: torch.Tensor) -> torch.Tensor:
    return a.reshape(a.shape[0], 3, 1, 1)


def _check_shapes(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def enhance_batch(
    degraded: torch.Tensor,
    t: torch.Tensor,
    a: torch.Tensor,
    t_floor: float = DEFAULT_T_FLOOR,
) -> torch.Tensor:
    """Unclamped IFM inversion for (B, 3, H, W) batches and (B, 3) ambient light."""
    _check_shapes(degraded, t, "enhance_batch")
    t_safe = torch.clamp(t, min=t_floor)
    ambient = _ambient(a)
    return (degraded - (1.0 - t_safe) * ambient) / t_safe


def degrade_batch(clean: torch.Tensor, t: torch.Tensor, a: torch.Tensor) -> torch.Tensor:
    """Unclamped IFM for (B, 3, H, W) batches."""
    _check_shapes(clean, t, "degrade_batch")
    ambient = _ambient(a)
    return clean * t + (1.0 - t) * ambient


def blur_sigma(input_size: int) -> float:
    """Blur scale of the ambient supervision for a given training resolution."""
    return input_size / 8.0


def gaussian_blur_batch(img: torch.Tensor, sigma: float) -> torch.Tensor:
    """Separable Gaussian blur truncated at 4 sigma with replicated borders."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = max(int(BLUR_TRUNCATE * sigma + 0.5), 1)
    offsets = torch.arange(-radius, radius + 1, dtype=img.dtype, device=img.device)
    kernel = torch.exp(-0.5 * (offsets / sigma) ** 2)
    kernel = kernel / kernel.sum()
    channels = img.shape[1]
    
    x = F.pad(img, (radius, radius, 0, 0), mode="replicate")
    x = F.conv2d(x, kernel.view(1, 1, 1, -1).repeat(channels, 1, 1, 1), groups=channels)
    x = F.pad(x, (0, 0, radius, radius), mode="replicate")
    return F.conv2d(x, kernel.view(1, 1, -1, 1).repeat(channels, 1, 1, 1), groups=channels)


def loss_fwd(reference: torch.Tensor, enhanced: torch.Tensor) -> torch.Tensor:
    """Forward-enhancement loss: MSE between the reference and the enhanced image."""
    _check_shapes(reference, enhanced, "loss_fwd")
    return torch.mean((enhanced - reference) ** 2)


def loss_bwd(degraded: torch.Tensor, redegraded: torch.Tensor) -> torch.Tensor:
    """Backward-degradation loss: MSE between the input and the reference re-degraded."""
    _check_shapes(degraded, redegraded, "loss_bwd")
    return torch.mean((degraded - redegraded) ** 2)


def loss_a_sup(degraded: torch.Tensor, a_hat: torch.Tensor, sigma: float) -> torch.Tensor:
    """Ambient supervision: MSE between the blurred input and the broadcast estimate."""
    blurred = gaussian_blur_batch(degraded, sigma)
    return torch.mean((blurred - _ambient(a_hat)) ** 2)


def loss_sup(l_fwd, l_bwd, l_a_sup, weights: LossWeights):
    """L_fwd + lambda1 L_bwd + lambda2 L_A-sup."""
    return l_fwd + weights.lambda1 * l_bwd + weights.lambda2 * l_a_sup


def unsup_pair(i1: torch.Tensor, a1_hat: torch.Tensor, alpha: float) -> torch.Tensor:
    """Build the more degraded image I2 = alpha I1 + (1 - alpha) A1.
    
    The ambient estimate is detached: I2 is treated as data.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    ambient = _ambient(a1_hat.detach())
    return torch.clamp(alpha * i1 + (1.0 - alpha) * ambient, 0.0, 1.0)


def loss_t_unsup(t2_hat: torch.Tensor, t1_hat: torch.Tensor, alpha: float) -> torch.Tensor:
    """MSE between t2_hat and alpha * t1_hat."""
    _check_shapes(t2_hat, t1_hat, "loss_t_unsup")
    return torch.mean((t2_hat - alpha * t1_hat) ** 2)


def loss_a_unsup(a2_hat: torch.Tensor, a1_hat: torch.Tensor) -> torch.Tensor:
    """MSE between the two ambient estimates."""
    _check_shapes(a2_hat, a1_hat, "loss_a_unsup")
    return torch.mean((a2_hat - a1_hat) ** 2)


def loss_gray_world(j1_hat: torch.Tensor) -> torch.Tensor:
    """Sum over channels of (channel mean - 0.5)^2, averaged over the batch."""
    means = j1_hat.mean(dim=(2, 3))
    return torch.mean(torch.sum((means - GRAY_TARGET) ** 2, dim=1))


def loss_unsup(l_t, l_a_unsup, l_gw, weights: LossWeights):
    """L_T + L_A-unsup + lambda3 L_gw."""
    return l_t + l_a_unsup + weights.lambda3 * l_gw


def loss_semi_sup(sup, unsup, weights: LossWeights):
    """L_sup + lambda_unsup L_unsup."""
    return sup + weights.lambda_unsup * unsup
