"""Training loop for the dual-stream network."""
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

import numpy as np
import pandas as pd
import torch

from metrics.full_reference import psnr, ssim
from network.checkpoint import save_checkpoint
from network.pa_uienet import PAUIENet
from training.losses import (
    LossWeights,
    blur_sigma,
    degrade_batch,
    enhance_batch,
    loss_a_sup,
    loss_a_unsup,
    loss_bwd,
    loss_fwd,
    loss_gray_world,
    loss_sup,
    loss_t_unsup,
    loss_unsup,
    unsup_pair,
)
from training.schedule import PHASE_UNSUP, TrainSchedule
from utils.errors import ConfigurationError, DimensionError
from utils.logger import setup_logger

logger = setup_logger(__name__)

LOSS_LOG_COLUMNS = ["iteration", "phase", "l_fwd", "l_bwd", "l_a_sup", "l_t", "l_a_unsup", "l_gw", "total"]
VALIDATION_COLUMNS = ["iteration", "psnr", "ssim"]


@dataclass
class LabeledBatch:
    """Degraded images with their clean references, (B, 3, H, W) each."""
    
    degraded: torch.Tensor
    reference: torch.Tensor
    
    def __post_init__(self):
        if self.degraded.shape != self.reference.shape:
            raise DimensionError(
                f"labeled batch shape mismatch {tuple(self.degraded.shape)} vs {tuple(self.reference.shape)}"
            )


@dataclass
class UnlabeledBatch:
    """Degraded images only; the unsupervised scheme never sees references."""
    
    degraded: torch.Tensor


def supervised_losses(
    model: PAUIENet,
    batch: LabeledBatch,
    weights: LossWeights,
    sigma: float,
) -> Dict[str, torch.Tensor]:
    """Bi-directional supervised objective on one labeled batch."""
    out = model(batch.degraded)
    enhanced = enhance_batch(batch.degraded, out.t_hat, out.a_hat)
    redegraded = degrade_batch(batch.reference, out.t_hat, out.a_hat)
    l_fwd = loss_fwd(batch.reference, enhanced)
    l_bwd = loss_bwd(batch.degraded, redegraded)
    l_a = loss_a_sup(batch.degraded, out.a_hat, sigma)
    return {
        "l_fwd": l_fwd,
        "l_bwd": l_bwd,
        "l_a_sup": l_a,
        "sup": loss_sup(l_fwd, l_bwd, l_a, weights),
    }


def unsupervised_losses(
    model: PAUIENet,
    batch: UnlabeledBatch,
    alpha: float,
    weights: LossWeights,
) -> Dict[str, torch.Tensor]:
    """Unsupervised objective from a re-degraded copy of the batch."""
    out1 = model(batch.degraded)
    enhanced1 = enhance_batch(batch.degraded, out1.t_hat, out1.a_hat)
    degraded2 = unsup_pair(batch.degraded, out1.a_hat, alpha)
    out2 = model(degraded2)
    l_t = loss_t_unsup(out2.t_hat, out1.t_hat, alpha)
    l_a = loss_a_unsup(out2.a_hat, out1.a_hat)
    l_gw = loss_gray_world(enhanced1)
    return {
        "l_t": l_t,
        "l_a_unsup": l_a,
        "l_gw": l_gw,
        "unsup": loss_unsup(l_t, l_a, l_gw, weights),
    }


class Trainer:
    """Runs the warm-up, then interleaves supervised and unsupervised blocks."""
    
    def __init__(
        self,
        model: PAUIENet,
        labeled: LabeledBatch,
        unlabeled: Optional[UnlabeledBatch],
        schedule: TrainSchedule,
        weights: LossWeights,
        seed: int = 0,
        output_dir: Optional[str] = None,
        validation: Optional[LabeledBatch] = None,
    ):
        """Initialize trainer.
        
        Args:
            model: Network to train (its dtype decides the training precision)
            labeled: Whole labeled set as one LabeledBatch
            unlabeled: Whole unlabeled set, may be None when no unsupervised block runs
            schedule: Iteration schedule and optimizer settings
            weights: Loss weights
            seed: Seed for batch sampling and alpha draws
            output_dir: Where checkpoints and logs go (None keeps everything in memory)
            validation: Optional labeled validation set
        """
        schedule.validate()
        weights.validate()
        if labeled is None or labeled.degraded.shape[0] == 0:
            raise ConfigurationError("labeled set is empty")
        if schedule.uses_unlabeled and (unlabeled is None or unlabeled.degraded.shape[0] == 0):
            raise ConfigurationError("unlabeled set is empty but unsupervised blocks are enabled")
        
        self.model = model
        self.schedule = schedule
        self.weights = weights
        self.seed = seed
        self.output_dir = output_dir
        
        param = next(model.parameters())
        self.dtype = param.dtype
        self.device = param.device
        self.labeled = self._to_device(labeled)
        self.unlabeled = self._to_device(unlabeled) if unlabeled is not None else None
        self.validation = self._to_device(validation) if validation is not None else None
        self.sigma = blur_sigma(labeled.degraded.shape[-1])
        
        self.optimizer = torch.optim.AdamW(
            model.parameters(),
            lr=schedule.lr,
            betas=schedule.betas,
            eps=schedule.eps,
            weight_decay=schedule.weight_decay,
        )
        self.rng = np.random.default_rng(seed)
        self.iteration = 0
        self.loss_log: List[Dict] = []
        self.validation_log: List[Dict] = []
    
    def _to_device(self, batch):
        if isinstance(batch, LabeledBatch):
            return LabeledBatch(
                degraded=batch.degraded.to(self.device, self.dtype),
                reference=batch.reference.to(self.device, self.dtype),
            )
        return UnlabeledBatch(degraded=batch.degraded.to(self.device, self.dtype))
    
    def _indices(self, size: int) -> torch.Tensor:
        chosen = self.rng.choice(size, size=self.schedule.batch, replace=size < self.schedule.batch)
        return torch.as_tensor(chosen, dtype=torch.long, device=self.device)
    
    def sample_labeled(self) -> LabeledBatch:
        idx = self._indices(self.labeled.degraded.shape[0])
        return LabeledBatch(degraded=self.labeled.degraded[idx], reference=self.labeled.reference[idx])
    
    def sample_unlabeled(self) -> UnlabeledBatch:
        idx = self._indices(self.unlabeled.degraded.shape[0])
        return UnlabeledBatch(degraded=self.unlabeled.degraded[idx])
    
    def sample_alpha(self) -> float:
        low, high = self.schedule.alpha_range
        return float(self.rng.uniform(low, high))
    
    def step(self) -> Dict:
        """Run one optimizer step and return its loss-log row."""
        phase = self.schedule.phase(self.iteration)
        row = {column: math.nan for column in LOSS_LOG_COLUMNS}
        
        self.model.train()
        self.optimizer.zero_grad()
        if phase == PHASE_UNSUP:
            losses = unsupervised_losses(self.model, self.sample_unlabeled(), self.sample_alpha(), self.weights)
            total = self.weights.lambda_unsup * losses["unsup"]
            keys = ("l_t", "l_a_unsup", "l_gw")
        else:
            losses = supervised_losses(self.model, self.sample_labeled(), self.weights, self.sigma)
            total = losses["sup"]
            keys = ("l_fwd", "l_bwd", "l_a_sup")
        total.backward()
        self.optimizer.step()
        
        self.iteration += 1
        row["iteration"] = self.iteration
        row["phase"] = phase
        for key in keys:
            row[key] = losses[key].item()
        row["total"] = total.item()
        self.loss_log.append(row)
        return row
    
    @torch.no_grad()
    def validate(self) -> Dict:
        """Mean PSNR/SSIM of clamped enhancements on the validation set (eval mode)."""
        self.model.eval()
        out = self.model(self.validation.degraded)
        enhanced = torch.clamp(enhance_batch(self.validation.degraded, out.t_hat, out.a_hat), 0.0, 1.0)
        enhanced = enhanced.permute(0, 2, 3, 1).cpu().double().numpy()
        reference = self.validation.reference.permute(0, 2, 3, 1).cpu().double().numpy()
        psnrs = [psnr(e, r) for e, r in zip(enhanced, reference)]
        ssims = [ssim(e, r) for e, r in zip(enhanced, reference)]
        self.model.train()
        row = {"iteration": self.iteration, "psnr": float(np.mean(psnrs)), "ssim": float(np.mean(ssims))}
        self.validation_log.append(row)
        logger.info(f"Validation @ {self.iteration}: PSNR {row['psnr']:.2f} dB | SSIM {row['ssim']:.4f}")
        return row
    
    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.loss_log, columns=LOSS_LOG_COLUMNS)
    
    def write_logs(self) -> None:
        if not self.output_dir:
            return
        os.makedirs(self.output_dir, exist_ok=True)
        self.loss_frame().to_csv(os.path.join(self.output_dir, "loss_log.csv"), index=False)
        if self.validation_log:
            pd.DataFrame(self.validation_log, columns=VALIDATION_COLUMNS).to_csv(
                os.path.join(self.output_dir, "validation_log.csv"), index=False
            )
    
    def checkpoint(self) -> Optional[str]:
        if not self.output_dir:
            return None
        path = os.path.join(self.output_dir, "checkpoints", f"checkpoint_{self.iteration:07d}.pt")
        save_checkpoint(path, self.model, self.iteration, self.optimizer)
        self.write_logs()
        logger.info(f"Checkpoint @ {self.iteration}: {path}")
        return path
    
    def run(self) -> Iterator[Optional[str]]:
        """Train until total_iters, yielding each checkpoint path as it is written."""
        logger.info("=" * 60)
        logger.info("Training started")
        logger.info("=" * 60)
        logger.info(f"Iterations: {self.schedule.total_iters} (warm-up {self.schedule.warmup_iters})")
        logger.info(f"Interleave: {self.schedule.sup_block} sup / {self.schedule.unsup_block} unsup "
                    f"({'on' if self.schedule.semi_supervised else 'off'})")
        logger.info(f"Labeled: {self.labeled.degraded.shape[0]} | "
                    f"Unlabeled: {0 if self.unlabeled is None else self.unlabeled.degraded.shape[0]}")
        logger.info(f"Batch: {self.schedule.batch} | LR: {self.schedule.lr} | dtype: {self.dtype}")
        logger.info("=" * 60)
        
        while self.iteration < self.schedule.total_iters:
            row = self.step()
            if not math.isfinite(row["total"]):
                raise FloatingPointError(f"Non-finite loss at iteration {self.iteration}: {row}")
            if self.validation is not None and self.schedule.val_every and self.iteration % self.schedule.val_every == 0:
                self.validate()
            if self.iteration % self.schedule.checkpoint_every == 0 and self.iteration < self.schedule.total_iters:
                yield self.checkpoint()
        
        logger.info(f"Training finished after {self.iteration} iterations (last total loss {self.loss_log[-1]['total']:.6f})")
        yield self.checkpoint()
        self.write_logs()


def train(
    model: PAUIENet,
    labeled: LabeledBatch,
    unlabeled: Optional[UnlabeledBatch],
    schedule: TrainSchedule,
    weights: LossWeights,
    seed: int = 0,
    output_dir: Optional[str] = None,
    validation: Optional[LabeledBatch] = None,
) -> Iterator[Optional[str]]:
    """Generator over checkpoint paths (None when `output_dir` is not set)."""
    trainer = Trainer(model, labeled, unlabeled, schedule, weights, seed, output_dir, validation)
    yield from trainer.run()
