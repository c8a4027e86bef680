"""Shared fixtures for the test suite."""
import os

import numpy as np
import pytest
import torch

# keep test runs from writing daily log files
os.environ.setdefault("LOG_DIR", "")

from formation.image_formation import degrade, transmission_from_depth  # noqa: E402
from network.pa_uienet import NetConfig, PAUIENet  # noqa: E402
from utils.image_io import write_depth, write_image  # noqa: E402

SYNTH_BETA = (1.2, 0.5, 0.3)
SYNTH_AMBIENT = (0.15, 0.55, 0.7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_toy_model(seed: int = 0, dtype=torch.float64, **overrides) -> PAUIENet:
    torch.manual_seed(seed)
    return PAUIENet(NetConfig.toy(**overrides)).to(dtype)


@pytest.fixture
def toy_model():
    return make_toy_model()


def ramp_depth(size: int, offset: float = 0.5, scale: float = 3.0, horizontal: bool = True) -> np.ndarray:
    ramp = np.linspace(0.0, 1.0, size)
    grid = np.tile(ramp, (size, 1)) if horizontal else np.tile(ramp[:, None], (1, size))
    return offset + scale * grid


def synthetic_pair(rng: np.random.Generator, size: int = 32, horizontal: bool = True):
    """Smooth clean image, ramp depth and the degraded image built from them."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    base = rng.uniform(0.2, 0.8, size=3)
    clean = np.stack(
        [
            np.clip(base[0] + 0.2 * np.sin(2 * np.pi * xx), 0, 1),
            np.clip(base[1] + 0.2 * np.cos(2 * np.pi * yy), 0, 1),
            np.clip(base[2] + 0.2 * (xx - yy), 0, 1),
        ],
        axis=2,
    )
    depth = ramp_depth(size, horizontal=horizontal)
    t = transmission_from_depth(depth, SYNTH_BETA)
    return clean, depth, t, degrade(clean, t, SYNTH_AMBIENT)


def write_dataset(root, rng, labeled: int = 3, unlabeled: int = 1, size: int = 32, depth: bool = True):
    """Write raw/, reference/ and depth/ under root; returns the image ids."""
    ids = []
    for i in range(labeled + unlabeled):
        image_id = f"img_{i:02d}"
        clean, d, _, degraded = synthetic_pair(rng, size, horizontal=i % 2 == 0)
        write_image(os.path.join(root, "raw", f"{image_id}.png"), degraded)
        if i < labeled:
            write_image(os.path.join(root, "reference", f"{image_id}.png"), clean)
        if depth:
            write_depth(os.path.join(root, "depth", f"{image_id}.npy"), d)
        ids.append(image_id)
    return ids


def gradient_check(model, loss_fn, num_params: int = 50, h: float = 1e-4, seed: int = 0):
    """Compare autograd against central differences on sampled parameters.

    Parameters the loss does not reach have no grad and count as zero.
    loss_fn must be a fixed function of the parameters: build any
    detached inputs once, outside it. Returns the largest relative error
    over the sampled entries.
    """
    params = [p for p in model.parameters() if p.requires_grad]
    model.zero_grad()
    loss_fn().backward()
    analytic = [torch.zeros_like(p) if p.grad is None else p.grad.detach().clone() for p in params]
    
    sizes = np.array([p.numel() for p in params])
    sampler = np.random.default_rng(seed)
    which = sampler.choice(len(params), size=num_params, p=sizes / sizes.sum())
    worst = 0.0
    with torch.no_grad():
        for k in which:
            flat = params[k].view(-1)
            index = int(sampler.integers(flat.numel()))
            original = flat[index].item()
            flat[index] = original + h
            plus = loss_fn().item()
            flat[index] = original - h
            minus = loss_fn().item()
            flat[index] = original
            numeric = (plus - minus) / (2 * h)
            exact = analytic[k].view(-1)[index].item()
            scale = max(abs(numeric), abs(exact), 1e-7)
            worst = max(worst, abs(numeric - exact) / scale)
    return worst
