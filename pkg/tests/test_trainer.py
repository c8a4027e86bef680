"""Tests for the training schedule and loop."""
import math
import os

import numpy as np
import pytest
import torch

from conftest import make_toy_model, synthetic_pair
from metrics.full_reference import psnr
from metrics.transmission import pcc_transmission
from training.losses import LossWeights, enhance_batch
from training.schedule import PHASE_SUP, PHASE_UNSUP, PHASE_WARMUP, TrainSchedule, phase_runs
from training.trainer import LOSS_LOG_COLUMNS, LabeledBatch, Trainer, UnlabeledBatch
from utils.errors import ConfigurationError, DimensionError


def _tensor(images):
    return torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).copy())


def _labeled(rng, count, size=32):
    pairs = [synthetic_pair(rng, size, horizontal=i % 2 == 0) for i in range(count)]
    batch = LabeledBatch(degraded=_tensor([p[3] for p in pairs]), reference=_tensor([p[0] for p in pairs]))
    return batch, [p[1] for p in pairs]


def _unlabeled(rng, count, size=32):
    return UnlabeledBatch(degraded=_tensor([synthetic_pair(rng, size)[3] for _ in range(count)]))


def _small_schedule(**overrides):
    values = dict(
        warmup_iters=4,
        total_iters=10,
        sup_block=2,
        unsup_block=2,
        batch=2,
        lr=1e-3,
        checkpoint_every=5,
    )
    values.update(overrides)
    return TrainSchedule(**values)


class TestSchedule:
    def test_post_warmup_counts(self):
        schedule = TrainSchedule(warmup_iters=10, total_iters=1510)
        phases = schedule.phases(10, 1510)
        assert schedule.count_phases(10) == {PHASE_SUP: 1200, PHASE_UNSUP: 300}
        assert phase_runs(phases) == [(PHASE_SUP, 120), (PHASE_UNSUP, 30)] * 10
    
    def test_default_boundaries(self):
        schedule = TrainSchedule()
        assert schedule.phase(0) == PHASE_WARMUP
        assert schedule.phase(2999) == PHASE_WARMUP
        assert schedule.phase(3000) == PHASE_SUP
        assert schedule.phase(3119) == PHASE_SUP
        assert schedule.phase(3120) == PHASE_UNSUP
        assert schedule.phase(3149) == PHASE_UNSUP
        assert schedule.phase(3150) == PHASE_SUP
    
    def test_supervised_only(self):
        schedule = TrainSchedule(warmup_iters=5, total_iters=400, semi_supervised=False)
        assert schedule.count_phases() == {PHASE_WARMUP: 5, PHASE_SUP: 395}
        assert not schedule.uses_unlabeled
    
    def test_uses_unlabeled(self):
        assert TrainSchedule(warmup_iters=10, total_iters=131).uses_unlabeled
        assert not TrainSchedule(warmup_iters=10, total_iters=130).uses_unlabeled
    
    @pytest.mark.parametrize(
        "overrides",
        [
            {"batch": 1},
            {"total_iters": 0},
            {"sup_block": 0},
            {"alpha_range": (0.9, 0.5)},
            {"alpha_range": (0.0, 0.5)},
            {"lr": 0.0},
            {"val_every": -1},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigurationError):
            TrainSchedule(**overrides).validate()


class TestBatches:
    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            LabeledBatch(degraded=torch.zeros(2, 3, 8, 8), reference=torch.zeros(2, 3, 8, 4))


class TestTrainer:
    def test_empty_labeled_set(self, rng):
        empty = LabeledBatch(degraded=torch.zeros(0, 3, 32, 32), reference=torch.zeros(0, 3, 32, 32))
        with pytest.raises(ConfigurationError):
            Trainer(make_toy_model(), empty, None, _small_schedule(semi_supervised=False), LossWeights())
    
    def test_missing_unlabeled_set(self, rng):
        labeled, _ = _labeled(rng, 2)
        with pytest.raises(ConfigurationError):
            Trainer(make_toy_model(), labeled, None, _small_schedule(), LossWeights())
    
    def test_loss_log(self, rng):
        labeled, _ = _labeled(rng, 3)
        trainer = Trainer(make_toy_model(seed=4), labeled, _unlabeled(rng, 2), _small_schedule(), LossWeights())
        checkpoints = list(trainer.run())
        assert checkpoints == [None, None]
        
        frame = trainer.loss_frame()
        assert list(frame.columns) == LOSS_LOG_COLUMNS
        assert frame["iteration"].tolist() == list(range(1, 11))
        assert frame["phase"].tolist() == [PHASE_WARMUP] * 4 + [PHASE_SUP] * 2 + [PHASE_UNSUP] * 2 + [PHASE_SUP] * 2
        
        sup_rows = frame[frame["phase"] != PHASE_UNSUP]
        unsup_rows = frame[frame["phase"] == PHASE_UNSUP]
        assert sup_rows[["l_fwd", "l_bwd", "l_a_sup"]].notna().all().all()
        assert sup_rows[["l_t", "l_a_unsup", "l_gw"]].isna().all().all()
        assert unsup_rows[["l_t", "l_a_unsup", "l_gw"]].notna().all().all()
        assert unsup_rows[["l_fwd", "l_bwd", "l_a_sup"]].isna().all().all()
        
        weights = LossWeights()
        for _, row in unsup_rows.iterrows():
            unsup = row["l_t"] + row["l_a_unsup"] + weights.lambda3 * row["l_gw"]
            assert row["total"] == pytest.approx(weights.lambda_unsup * unsup, rel=1e-9)
        for _, row in sup_rows.iterrows():
            sup = row["l_fwd"] + weights.lambda1 * row["l_bwd"] + weights.lambda2 * row["l_a_sup"]
            assert row["total"] == pytest.approx(sup, rel=1e-9)
    
    def test_identical_seeds_give_identical_logs(self, rng):
        labeled, _ = _labeled(rng, 4)
        unlabeled = _unlabeled(rng, 3)
        schedule = _small_schedule(warmup_iters=40, total_iters=100, sup_block=12, unsup_block=3, checkpoint_every=1000)
        logs = []
        for _ in range(2):
            trainer = Trainer(make_toy_model(seed=8), labeled, unlabeled, schedule, LossWeights(), seed=5)
            list(trainer.run())
            logs.append(trainer.loss_frame())
        assert len(logs[0]) == 100
        assert logs[0].equals(logs[1])
    
    def test_sampling_depends_on_seed(self, rng):
        labeled, _ = _labeled(rng, 4)
        schedule = _small_schedule(semi_supervised=False)
        draws = []
        for seed in (0, 1):
            trainer = Trainer(make_toy_model(), labeled, None, schedule, LossWeights(), seed=seed)
            draws.append([trainer.sample_alpha() for _ in range(5)])
        assert draws[0] != draws[1]
        assert all(0.5 <= a <= 0.9 for a in draws[0] + draws[1])
    
    def test_checkpoints_and_logs(self, rng, tmp_path):
        labeled, _ = _labeled(rng, 3)
        validation, _ = _labeled(rng, 2)
        trainer = Trainer(
            make_toy_model(seed=6),
            labeled,
            _unlabeled(rng, 2),
            _small_schedule(val_every=5),
            LossWeights(),
            output_dir=str(tmp_path),
            validation=validation,
        )
        checkpoints = list(trainer.run())
        assert [os.path.basename(p) for p in checkpoints] == ["checkpoint_0000005.pt", "checkpoint_0000010.pt"]
        assert all(os.path.isfile(p) for p in checkpoints)
        assert os.path.isfile(tmp_path / "loss_log.csv")
        assert os.path.isfile(tmp_path / "validation_log.csv")
        assert [row["iteration"] for row in trainer.validation_log] == [5, 10]
        assert all(math.isfinite(row["psnr"]) and 0.0 <= row["ssim"] <= 1.0 for row in trainer.validation_log)
    
    def test_training_reduces_forward_loss(self, rng):
        labeled, _ = _labeled(rng, 2)
        schedule = _small_schedule(warmup_iters=150, total_iters=150, semi_supervised=False, checkpoint_every=1000)
        trainer = Trainer(make_toy_model(seed=2, dtype=torch.float32), labeled, None, schedule, LossWeights())
        list(trainer.run())
        frame = trainer.loss_frame()
        assert frame["l_fwd"].tail(10).mean() < frame["l_fwd"].head(10).mean()


def _overfit(rng, seed=0, lambda1=0.001, iterations=2000):
    labeled, depths = _labeled(rng, 4)
    schedule = TrainSchedule(
        warmup_iters=iterations,
        total_iters=iterations,
        semi_supervised=False,
        batch=4,
        lr=1e-3,
        checkpoint_every=iterations,
    )
    model = make_toy_model(seed=seed, dtype=torch.float32)
    trainer = Trainer(model, labeled, None, schedule, LossWeights(lambda1=lambda1), seed=seed)
    list(trainer.run())
    return trainer, labeled, depths


def _estimates(model, degraded):
    model.eval()
    with torch.no_grad():
        out = model(degraded.to(torch.float32))
    return out, out.t_hat.permute(0, 2, 3, 1).double().numpy()


@pytest.mark.slow
class TestDeskScaleTraining:
    def test_overfits_and_identifies_transmission(self, rng):
        trainer, labeled, depths = _overfit(rng)
        assert trainer.loss_log[-1]["l_fwd"] < 1e-3
        
        out, t_hat = _estimates(trainer.model, labeled.degraded)
        enhanced = torch.clamp(enhance_batch(labeled.degraded.float(), out.t_hat, out.a_hat), 0.0, 1.0)
        enhanced = enhanced.permute(0, 2, 3, 1).double().numpy()
        reference = labeled.reference.permute(0, 2, 3, 1).numpy()
        assert min(psnr(e, r) for e, r in zip(enhanced, reference)) > 30.0
        assert min(pcc_transmission(t, d, "R") for t, d in zip(t_hat, depths)) > 0.9
    
    def test_bidirectional_scheme_helps_transmission(self):
        held_out, held_depths = _labeled(np.random.default_rng(99), 8)
        wins = 0
        for seed in range(5):
            scores = []
            for lambda1 in (0.001, 0.0):
                trainer, _, _ = _overfit(np.random.default_rng(seed), seed=seed, lambda1=lambda1)
                _, t_hat = _estimates(trainer.model, held_out.degraded)
                scores.append(np.mean([pcc_transmission(t, d, "R") for t, d in zip(t_hat, held_depths)]))
            wins += scores[0] >= scores[1]
        assert wins >= 4
