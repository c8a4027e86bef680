"""Versioned checkpoint archive for the network."""
import os
from typing import Dict, Optional, Tuple

import torch

from network.pa_uienet import NetConfig, PAUIENet
from utils.errors import ConfigurationError
from utils.logger import setup_logger

logger = setup_logger(__name__)

MAGIC = "PAUIE"
FORMAT_VERSION = 1


def save_checkpoint(
    path: str,
    model: PAUIENet,
    iteration: int,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> str:
    """Save model parameters, buffers, config and iteration counter.
    
    Args:
        path: Destination file
        model: Network to save
        iteration: Number of optimizer steps taken so far
        optimizer: Optional optimizer whose state is stored for resumption
        
    Returns:
        The written path
    """
    entries = {}
    for name, tensor in model.state_dict().items():
        entries[name] = {
            "dtype": str(tensor.dtype).replace("torch.", ""),
            "shape": list(tensor.shape),
            "data": tensor.detach().cpu().clone(),
        }
    archive = {
        "magic": MAGIC,
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "iteration": int(iteration),
        "parameters": entries,
    }
    if optimizer is not None:
        archive["optimizer"] = optimizer.state_dict()
    
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    torch.save(archive, path)
    logger.debug(f"Checkpoint saved: {path} (iteration {iteration})")
    return path


def read_archive(path: str) -> Dict:
    """Load and validate a checkpoint archive without building a model."""
    if not os.path.isfile(path):
        raise ConfigurationError(f"Checkpoint not found: {path}")
    archive = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(archive, dict) or archive.get("magic") != MAGIC:
        raise ConfigurationError(f"{path} is not a network checkpoint")
    if archive.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(
            f"Unsupported checkpoint version {archive.get('format_version')} (expected {FORMAT_VERSION})"
        )
    return archive


def load_checkpoint(path: str) -> Tuple[PAUIENet, int, Dict]:
    """Rebuild a network from a checkpoint.
    
    Returns:
        (model in eval mode, iteration, raw archive)
    """
    archive = read_archive(path)
    cfg = NetConfig.from_dict(archive["config"])
    model = PAUIENet(cfg)
    
    entries = archive["parameters"]
    expected = model.state_dict()
    missing = sorted(set(expected) - set(entries))
    unexpected = sorted(set(entries) - set(expected))
    if missing or unexpected:
        raise ConfigurationError(f"Checkpoint {path} does not match its config: missing {missing}, unexpected {unexpected}")
    
    float_dtypes = {entry["dtype"] for entry in entries.values() if entry["dtype"].startswith("float")}
    if len(float_dtypes) == 1:
        model.to(getattr(torch, float_dtypes.pop()))
    
    state = {}
    for name, entry in entries.items():
        data = entry["data"]
        if list(data.shape) != entry["shape"] or list(data.shape) != list(expected[name].shape):
            raise ConfigurationError(f"Checkpoint {path}: shape mismatch for {name}")
        state[name] = data
    model.load_state_dict(state)
    model.eval()
    logger.info(f"Loaded checkpoint {path} (iteration {archive['iteration']})")
    return model, archive["iteration"], archive
