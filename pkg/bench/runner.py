"""Batch commands: enhance, estimate, synth, train, eval, ingest-check.

Each command returns an exit status: 0 on success, 1 when some items
failed (they are reported and the run continues). Configuration errors
are raised before any output is written.
"""
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from bench.dataset import DatasetManifest, ManifestEntry, index_by_stem, ingest
from bench.methods import PARAMETER_METHODS, MethodResult, build_method
from config import RunConfig, TrainConfig
from formation.image_formation import as_vector3, degrade, transmission_from_depth
from metrics.report import error_row, evaluate_image, write_report
from network.pa_uienet import NetConfig, PAUIENet
from training.losses import LossWeights
from training.schedule import TrainSchedule
from training.trainer import LabeledBatch, Trainer, UnlabeledBatch
from utils.errors import ConfigurationError, DimensionError
from utils.image_io import (
    DEPTH_EXTENSIONS,
    read_depth,
    read_image,
    resize_image,
    to_uint8,
    write_depth,
    write_image,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_ITEM_FAILURES = 1
EXIT_CONFIG_ERROR = 2


def _ordered_map(func: Callable, items: Sequence, workers: int, desc: str) -> List:
    """Apply func over items with a bounded pool; results keep input order."""
    if workers <= 1:
        return [func(item) for item in tqdm(items, desc=desc, disable=None)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), total=len(items), desc=desc, disable=None))


def _quantized(img: np.ndarray) -> np.ndarray:
    return to_uint8(img).astype(np.float64) / 255.0


def _status(rows: List[Dict]) -> int:
    failures = [r for r in rows if r.get("error")]
    if failures:
        logger.warning(f"{len(failures)} item(s) failed: {', '.join(str(r['image_id']) for r in failures)}")
        return EXIT_ITEM_FAILURES
    return EXIT_OK


def run_enhance(cfg: RunConfig, manifest: DatasetManifest) -> Tuple[pd.DataFrame, int]:
    """Enhance every entry, write 8-bit PNGs and the metric CSV.
    
    Args:
        cfg: Run configuration (validated here before anything is written)
        manifest: Dataset to process
        
    Returns:
        (metric report frame, exit status)
    """
    cfg.validate()
    method = build_method(cfg)
    image_dir = os.path.join(cfg.output_dir, "enhanced")
    os.makedirs(image_dir, exist_ok=True)
    
    logger.info("=" * 60)
    logger.info(f"Enhance: method {cfg.method} | {len(manifest.entries)} image(s) | workers {cfg.workers}")
    logger.info("=" * 60)
    
    def process(entry: ManifestEntry) -> Dict:
        try:
            img = read_image(entry.degraded)
            result: MethodResult = method(img)
            write_image(os.path.join(image_dir, f"{entry.image_id}.png"), result.enhanced)
            if result.flags:
                logger.info(f"{entry.image_id}: {result.flags}")
            
            reference = read_image(entry.reference) if entry.reference else None
            depth = read_depth(entry.depth) if entry.depth and result.t is not None else None
            report = evaluate_image(
                _quantized(result.enhanced),
                reference=reference,
                t=result.t,
                depth=depth,
                full_reference=cfg.full_reference,
                no_reference=cfg.no_reference,
                transmission=cfg.transmission,
                pcc_channel=cfg.pcc_channel,
            )
            return report.to_row(entry.image_id)
        except Exception as e:
            logger.error(f"{entry.image_id}: {e}")
            return error_row(entry.image_id, str(e))
    
    rows = _ordered_map(process, manifest.entries, cfg.workers, "enhance")
    frame = write_report(rows, os.path.join(cfg.output_dir, "metrics.csv"))
    return frame, _status(rows)


def _ambient_swatch(a: np.ndarray, size: int = 32) -> np.ndarray:
    return np.broadcast_to(np.clip(a, 0.0, 1.0), (size, size, 3)).copy()


def run_estimate(cfg: RunConfig, manifest: DatasetManifest) -> Tuple[Dict[str, List[float]], int]:
    """Write transmission maps (PNG + .npy) and ambient light (swatch PNG + JSON)."""
    cfg.validate()
    if cfg.method not in PARAMETER_METHODS:
        raise ConfigurationError(f"estimate needs a parameter method ({', '.join(PARAMETER_METHODS)}), got {cfg.method}")
    method = build_method(cfg)
    t_dir = os.path.join(cfg.output_dir, "transmission")
    a_dir = os.path.join(cfg.output_dir, "ambient")
    os.makedirs(t_dir, exist_ok=True)
    os.makedirs(a_dir, exist_ok=True)
    
    def process(entry: ManifestEntry):
        try:
            result = method(read_image(entry.degraded))
            write_image(os.path.join(t_dir, f"{entry.image_id}.png"), result.t)
            np.save(os.path.join(t_dir, f"{entry.image_id}.npy"), result.t)
            write_image(os.path.join(a_dir, f"{entry.image_id}.png"), _ambient_swatch(result.a))
            return entry.image_id, [float(v) for v in result.a], None
        except Exception as e:
            logger.error(f"{entry.image_id}: {e}")
            return entry.image_id, None, str(e)
    
    results = _ordered_map(process, manifest.entries, cfg.workers, "estimate")
    ambient = {image_id: a for image_id, a, err in results if err is None}
    errors = {image_id: err for image_id, _, err in results if err is not None}
    with open(os.path.join(cfg.output_dir, "ambient.json"), "w", encoding="utf-8") as f:
        json.dump({"method": cfg.method, "ambient": ambient, "errors": errors}, f, indent=2)
    if errors:
        logger.warning(f"{len(errors)} item(s) failed: {', '.join(errors)}")
        return ambient, EXIT_ITEM_FAILURES
    return ambient, EXIT_OK


def _jittered(values: np.ndarray, rng: np.random.Generator, jitter: float) -> np.ndarray:
    if jitter <= 0:
        return values.copy()
    return values * (1.0 + rng.uniform(-jitter, jitter, size=3))


def run_synth(
    clean_dir: str,
    depth_dir: str,
    beta: Sequence[float],
    ambient: Sequence[float],
    out_dir: str,
    seed: int = 0,
    jitter: float = 0.0,
) -> Tuple[DatasetManifest, int]:
    """Synthesize degraded images from clean images and depth maps.
    
    Writes `raw/`, `reference/`, `depth/`, `params.json` (per-image beta,
    ambient light and depth path) and `manifest.json` under `out_dir`.
    
    Args:
        clean_dir: Directory of clean images
        depth_dir: Directory of depth maps paired by stem
        beta: Attenuation coefficients (R largest)
        ambient: Ambient light in [0, 1]
        out_dir: Output dataset root
        seed: Seed for per-image jitter
        jitter: Relative jitter of beta and ambient light per image (0 disables)
        
    Returns:
        (manifest of the written dataset, exit status)
    """
    beta = as_vector3(beta, "beta")
    ambient = as_vector3(ambient, "ambient")
    if np.any(beta < 0) or beta[0] < beta[1] or beta[0] < beta[2]:
        raise ConfigurationError(f"beta must be nonnegative with the red coefficient largest, got {beta.tolist()}")
    if np.any(ambient < 0) or np.any(ambient > 1):
        raise ConfigurationError(f"ambient light must lie in [0, 1], got {ambient.tolist()}")
    if not 0.0 <= jitter < 1.0:
        raise ConfigurationError(f"jitter must be in [0, 1), got {jitter}")
    if not os.path.isdir(clean_dir) or not os.path.isdir(depth_dir):
        raise ConfigurationError(f"clean ({clean_dir}) and depth ({depth_dir}) directories must exist")
    
    rng = np.random.default_rng(seed)
    cleans = index_by_stem(clean_dir)
    depths = index_by_stem(depth_dir, DEPTH_EXTENSIONS)
    entries: List[ManifestEntry] = []
    params: Dict[str, Dict] = {}
    skipped = 0
    for stem, clean_path in cleans.items():
        # draw before skipping so each image's parameters depend only on its position
        beta_i = _jittered(beta, rng, jitter)
        beta_i[0] = max(beta_i)
        ambient_i = np.clip(_jittered(ambient, rng, jitter), 0.0, 1.0)
        if stem not in depths:
            logger.warning(f"No depth map for {stem}, skipped")
            skipped += 1
            continue
        try:
            clean = read_image(clean_path)
            depth = read_depth(depths[stem])
            if depth.shape != clean.shape[:2]:
                raise DimensionError(f"depth {depth.shape} does not match image {clean.shape[:2]}")
            degraded = degrade(clean, transmission_from_depth(depth, beta_i), ambient_i)
        except Exception as e:
            logger.warning(f"{stem}: {e}, skipped")
            skipped += 1
            continue
        raw_path = os.path.join(out_dir, "raw", f"{stem}.png")
        ref_path = os.path.join(out_dir, "reference", f"{stem}.png")
        depth_path = os.path.join(out_dir, "depth", f"{stem}.npy")
        write_image(raw_path, degraded)
        write_image(ref_path, clean)
        write_depth(depth_path, depth)
        entries.append(ManifestEntry(image_id=stem, degraded=raw_path, reference=ref_path, depth=depth_path))
        params[stem] = {"beta": beta_i.tolist(), "ambient": ambient_i.tolist(), "depth": depth_path}
    
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "params.json"), "w", encoding="utf-8") as f:
        json.dump({"version": 1, "seed": seed, "images": params}, f, indent=2)
    manifest = DatasetManifest(root=out_dir, entries=entries)
    manifest.save(os.path.join(out_dir, "manifest.json"))
    logger.info(f"Synthesized {len(entries)} image(s) into {out_dir} ({skipped} skipped)")
    return manifest, EXIT_ITEM_FAILURES if skipped else EXIT_OK


def _stack(paths: List[str], size: int) -> torch.Tensor:
    images = [resize_image(read_image(p), size) for p in paths]
    return torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).copy())


def build_training_sets(
    cfg: TrainConfig,
    labeled: DatasetManifest,
    unlabeled: Optional[DatasetManifest],
    validation: Optional[DatasetManifest] = None,
) -> Tuple[LabeledBatch, Optional[UnlabeledBatch], Optional[LabeledBatch]]:
    """Load manifests into tensors resized to the training resolution."""
    pairs = labeled.labeled()
    if not pairs:
        raise ConfigurationError(f"No labeled pairs under {labeled.root}")
    labeled_batch = LabeledBatch(
        degraded=_stack([e.degraded for e in pairs], cfg.input_size),
        reference=_stack([e.reference for e in pairs], cfg.input_size),
    )
    unlabeled_paths = [e.degraded for e in labeled.unlabeled()]
    if unlabeled is not None:
        unlabeled_paths += [e.degraded for e in unlabeled.entries]
    unlabeled_batch = UnlabeledBatch(degraded=_stack(unlabeled_paths, cfg.input_size)) if unlabeled_paths else None
    validation_batch = None
    if validation is not None and validation.labeled():
        val_pairs = validation.labeled()
        validation_batch = LabeledBatch(
            degraded=_stack([e.degraded for e in val_pairs], cfg.input_size),
            reference=_stack([e.reference for e in val_pairs], cfg.input_size),
        )
    return labeled_batch, unlabeled_batch, validation_batch


def build_model(cfg: TrainConfig) -> PAUIENet:
    """Seeded model construction for a training config."""
    torch.manual_seed(cfg.seed)
    if cfg.toy:
        net_cfg = NetConfig.toy(input_size=cfg.input_size, use_rct=cfg.use_rct, use_rcm=cfg.use_rcm)
    else:
        net_cfg = NetConfig(input_size=cfg.input_size, use_rct=cfg.use_rct, use_rcm=cfg.use_rcm)
    model = PAUIENet(net_cfg)
    if cfg.double:
        model = model.double()
    logger.info(f"Model: {model.parameter_count():,} parameters")
    return model


def run_train(
    cfg: TrainConfig,
    labeled: DatasetManifest,
    unlabeled: Optional[DatasetManifest] = None,
    validation: Optional[DatasetManifest] = None,
) -> Tuple[Trainer, List[str]]:
    """Train the network, writing checkpoints and the loss log under cfg.output_dir.
    
    Returns:
        (finished trainer, checkpoint paths in order)
    """
    schedule = TrainSchedule(
        warmup_iters=cfg.warmup_iters,
        total_iters=cfg.total_iters,
        sup_block=cfg.sup_block,
        unsup_block=cfg.unsup_block,
        lr=cfg.lr,
        batch=cfg.batch,
        alpha_range=(cfg.alpha_low, cfg.alpha_high),
        semi_supervised=cfg.semi_supervised,
        checkpoint_every=cfg.checkpoint_every,
        val_every=cfg.val_every,
    )
    weights = LossWeights(cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda_unsup)
    schedule.validate()
    weights.validate()
    
    labeled_batch, unlabeled_batch, validation_batch = build_training_sets(cfg, labeled, unlabeled, validation)
    model = build_model(cfg)
    trainer = Trainer(
        model,
        labeled_batch,
        unlabeled_batch,
        schedule,
        weights,
        seed=cfg.seed,
        output_dir=cfg.output_dir,
        validation=validation_batch,
    )
    checkpoints = [path for path in trainer.run() if path]
    return trainer, checkpoints


def run_eval(
    enhanced_dir: str,
    out_csv: str,
    reference_dir: Optional[str] = None,
    depth_dir: Optional[str] = None,
    transmission_dir: Optional[str] = None,
    full_reference: bool = True,
    no_reference: bool = True,
    pcc_channel: str = "R",
) -> Tuple[pd.DataFrame, int]:
    """Compute metrics over a directory of enhanced images.
    
    References, depth maps and transmission maps (`<id>.npy`) pair by stem.
    Unmatched files are reported; corrupt files become error rows.
    """
    if not os.path.isdir(enhanced_dir):
        raise ConfigurationError(f"Enhanced directory does not exist: {enhanced_dir}")
    enhanced = index_by_stem(enhanced_dir)
    references = index_by_stem(reference_dir) if reference_dir else {}
    depths = index_by_stem(depth_dir, DEPTH_EXTENSIONS) if depth_dir else {}
    transmissions = index_by_stem(transmission_dir, (".npy",)) if transmission_dir else {}
    
    if reference_dir:
        unmatched = sorted(set(enhanced) - set(references))
        if unmatched:
            logger.warning(f"No reference for: {', '.join(unmatched)}")
        extra = sorted(set(references) - set(enhanced))
        if extra:
            logger.warning(f"References without an enhanced image: {', '.join(extra)}")
    
    rows = []
    for stem, path in tqdm(enhanced.items(), desc="eval", disable=None):
        try:
            img = read_image(path)
            reference = read_image(references[stem]) if stem in references else None
            t = np.load(transmissions[stem]) if stem in transmissions else None
            depth = read_depth(depths[stem]) if stem in depths and t is not None else None
            report = evaluate_image(
                img,
                reference=reference,
                t=t,
                depth=depth,
                full_reference=full_reference,
                no_reference=no_reference,
                pcc_channel=pcc_channel,
            )
            rows.append(report.to_row(stem))
        except Exception as e:
            logger.error(f"{stem}: {e}")
            rows.append(error_row(stem, str(e)))
    frame = write_report(rows, out_csv)
    return frame, _status(rows)


def ingest_check(root: str, manifest_path: Optional[str] = None) -> Tuple[DatasetManifest, int]:
    """Validate a dataset directory and optionally save its manifest."""
    manifest = ingest(root, validate=True)
    if manifest_path:
        manifest.save(manifest_path)
        logger.info(f"Manifest written: {manifest_path}")
    return manifest, EXIT_OK
