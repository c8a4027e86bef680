"""Warm-up and supervised/unsupervised interleave schedule."""
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Tuple

from utils.errors import ConfigurationError

PHASE_WARMUP = "warmup"
PHASE_SUP = "sup"
PHASE_UNSUP = "unsup"


@dataclass
class TrainSchedule:
    """Iteration counts and optimizer settings.
    
    Iterations are optimizer steps; total_iters includes the warm-up.
    """
    
    warmup_iters: int = 3000
    total_iters: int = 150000
    sup_block: int = 120
    unsup_block: int = 30
    lr: float = 1e-4
    batch: int = 6
    alpha_range: Tuple[float, float] = (0.5, 0.9)
    semi_supervised: bool = True
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    checkpoint_every: int = 5000
    val_every: int = 0
    
    def validate(self) -> bool:
        counts = {
            "warmup_iters": self.warmup_iters,
            "total_iters": self.total_iters,
            "sup_block": self.sup_block,
            "unsup_block": self.unsup_block,
            "batch": self.batch,
            "checkpoint_every": self.checkpoint_every,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {value}")
        if self.batch < 2:
            raise ConfigurationError("batch must be >= 2 for batch normalization")
        if self.val_every < 0:
            raise ConfigurationError(f"val_every must be >= 0, got {self.val_every}")
        low, high = self.alpha_range
        if not 0.0 < low <= high < 1.0:
            raise ConfigurationError(f"alpha_range must lie within (0, 1), got {self.alpha_range}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        return True
    
    def phase(self, step: int) -> str:
        """Phase of the 0-based optimizer step."""
        if step < self.warmup_iters:
            return PHASE_WARMUP
        if not self.semi_supervised:
            return PHASE_SUP
        position = (step - self.warmup_iters) % (self.sup_block + self.unsup_block)
        return PHASE_SUP if position < self.sup_block else PHASE_UNSUP
    
    def phases(self, start: int, stop: int) -> List[str]:
        return [self.phase(step) for step in range(start, stop)]
    
    def count_phases(self, start: int = 0, stop: int = None) -> Dict[str, int]:
        """Count phases over steps [start, stop)."""
        stop = self.total_iters if stop is None else stop
        return dict(Counter(self.phases(start, stop)))
    
    @property
    def uses_unlabeled(self) -> bool:
        return self.semi_supervised and self.total_iters > self.warmup_iters + self.sup_block


def phase_runs(phases: List[str]) -> List[Tuple[str, int]]:
    """Collapse a phase sequence into (phase, run length) pairs."""
    runs: List[Tuple[str, int]] = []
    for phase in phases:
        if runs and runs[-1][0] == phase:
            runs[-1] = (phase, runs[-1][1] + 1)
        else:
            runs.append((phase, 1))
    return runs
