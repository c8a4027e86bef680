"""Enhancement methods selectable from the command line."""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import torch

from config import RunConfig
from formation.image_formation import enhance
from network.checkpoint import load_checkpoint
from network.pa_uienet import PAUIENet
from priors.dark_channel import dcp_estimate, udcp_estimate
from priors.enhancers import gray_world_gains, hist_equalize, retinex_msr
from utils.image_io import resize_image, resize_to

PARAMETER_METHODS = ("dcp", "udcp", "pauienet")


@dataclass
class MethodResult:
    """Output of one method on one image; t and a are set by IFM-based methods."""
    
    enhanced: np.ndarray
    t: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None
    flags: Dict[str, object] = field(default_factory=dict)


class NetworkEstimator:
    """Eval-mode network wrapper working at the network's input resolution."""
    
    def __init__(self, model: PAUIENet):
        self.model = model.eval()
        self.size = model.cfg.input_size
        self.dtype = next(model.parameters()).dtype
    
    @classmethod
    def from_checkpoint(cls, path: str) -> "NetworkEstimator":
        model, _, _ = load_checkpoint(path)
        return cls(model)
    
    @torch.no_grad()
    def estimate(self, img: np.ndarray):
        """Return (t, a, rct_weight) for an (H, W, 3) image; t is resized back to (H, W)."""
        height, width = img.shape[:2]
        resized = resize_image(img, self.size) if (height, width) != (self.size, self.size) else img
        batch = torch.from_numpy(np.ascontiguousarray(resized.transpose(2, 0, 1)))[None].to(self.dtype)
        out = self.model(batch)
        t = out.t_hat[0].permute(1, 2, 0).double().numpy()
        if t.shape[:2] != (height, width):
            t = np.clip(resize_to(t, height, width), 1e-6, 1.0)
        return t, out.a_hat[0].double().numpy(), float(out.rct_weight[0])


def build_method(cfg: RunConfig) -> Callable[[np.ndarray], MethodResult]:
    """Return a function image -> MethodResult for the configured method."""
    if cfg.method in ("dcp", "udcp"):
        estimator = dcp_estimate if cfg.method == "dcp" else udcp_estimate
        
        def run_prior(img: np.ndarray) -> MethodResult:
            est = estimator(
                img,
                patch=cfg.patch,
                omega=cfg.omega,
                top_frac=cfg.top_frac,
                t_floor=cfg.t_floor,
                gf_radius=cfg.gf_radius,
                gf_eps=cfg.gf_eps,
                refine=cfg.refine,
            )
            return MethodResult(enhance(img, est.t, est.a, cfg.t_floor), est.t, est.a, est.flags)
        
        return run_prior
    
    if cfg.method == "pauienet":
        network = NetworkEstimator.from_checkpoint(cfg.checkpoint)
        
        def run_network(img: np.ndarray) -> MethodResult:
            t, a, weight = network.estimate(img)
            return MethodResult(enhance(img, t, a, cfg.t_floor), t, a, {"rct_weight": weight})
        
        return run_network
    
    if cfg.method == "he":
        return lambda img: MethodResult(hist_equalize(img, cfg.bins))
    if cfg.method == "retinex":
        return lambda img: MethodResult(retinex_msr(img, cfg.retinex_scales))
    
    def run_gray_world(img: np.ndarray) -> MethodResult:
        gains, capped = gray_world_gains(img)
        flags = {"capped_channels": capped} if capped else {}
        return MethodResult(np.clip(img * gains, 0.0, 1.0), flags=flags)
    
    return run_gray_world
