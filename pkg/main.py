"""Command-line entry point for the underwater enhancement toolkit."""
import argparse
import os
import sys
from typing import Dict, List, Optional

from bench.dataset import DatasetManifest, ingest
from bench.runner import (
    EXIT_CONFIG_ERROR,
    EXIT_ITEM_FAILURES,
    EXIT_OK,
    ingest_check,
    run_enhance,
    run_estimate,
    run_eval,
    run_synth,
    run_train,
)
from config import METHODS, Config, RunConfig, TrainConfig
from utils.errors import ConfigurationError, ImageLoadError, PairingError, ToolkitError
from utils.logger import setup_logger

logger = setup_logger(__name__)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=METHODS, default="dcp", help="Enhancement method")
    parser.add_argument("--input-dir", help="Dataset root (raw/ reference/ depth/) or a flat image directory")
    parser.add_argument("--output-dir", help="Output directory")
    parser.add_argument("--config", help="Run config file (KEY=value with method sections)")
    parser.add_argument("--checkpoint", help="Network checkpoint (method pauienet)")
    parser.add_argument("--t-floor", type=float, help="Transmission floor used when inverting the model")
    parser.add_argument("--patch", type=int, help="Dark channel patch size (odd)")
    parser.add_argument("--omega", type=float, help="Haze retention factor")
    parser.add_argument("--top-frac", type=float, help="Fraction of brightest dark-channel pixels for ambient light")
    parser.add_argument("--gf-radius", type=int, help="Guided filter radius")
    parser.add_argument("--gf-eps", type=float, help="Guided filter regularization")
    parser.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                        help="Refine transmission with the guided filter")
    parser.add_argument("--bins", type=int, help="Histogram equalization bins")
    parser.add_argument("--retinex-scales", type=_floats, help="Comma-separated Retinex Gaussian scales")
    parser.add_argument("--full-reference", action=argparse.BooleanOptionalAction, default=None,
                        help="Compute PSNR/SSIM/angular error where a reference exists")
    parser.add_argument("--blind-metrics", dest="no_reference", action=argparse.BooleanOptionalAction,
                        default=None, help="Compute the no-reference metrics UIQM/UCIQE")
    parser.add_argument("--transmission", action=argparse.BooleanOptionalAction, default=None,
                        help="Compute transmission PCC where a depth map exists")
    parser.add_argument("--pcc-channel", choices=("R", "G", "B"), help="Transmission channel for PCC")
    parser.add_argument("--workers", type=int, help="Worker threads")
    parser.add_argument("--seed", type=int, help="Random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Underwater image enhancement toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    _add_run_options(commands.add_parser("enhance", help="Enhance a dataset and write a metric report"))
    _add_run_options(commands.add_parser("estimate", help="Write transmission maps and ambient light"))

    synth = commands.add_parser("synth", help="Synthesize degraded images from clean images and depth")
    synth.add_argument("--clean-dir", required=True, help="Directory of clean images")
    synth.add_argument("--depth-dir", required=True, help="Directory of depth maps (.npy or image)")
    synth.add_argument("--beta", type=_floats, default=[1.0, 0.4, 0.3], help="Attenuation R,G,B (R largest)")
    synth.add_argument("--ambient", type=_floats, default=[0.1, 0.6, 0.7], help="Ambient light R,G,B")
    synth.add_argument("--output-dir", required=True, help="Output dataset root")
    synth.add_argument("--seed", type=int, default=Config.SEED, help="Random seed")
    synth.add_argument("--jitter", type=float, default=0.0, help="Relative per-image jitter of beta and ambient")

    train = commands.add_parser("train", help="Train the dual-stream network")
    train.add_argument("--config", help="Run config file (TRAIN_*, NET_*, LOSS_* keys)")
    train.add_argument("--labeled-dir", help="Labeled dataset root")
    train.add_argument("--unlabeled-dir", help="Unlabeled image directory")
    train.add_argument("--validation-dir", help="Labeled validation dataset root")
    train.add_argument("--output-dir", help="Run directory for checkpoints and logs")
    train.add_argument("--input-size", type=int, help="Training resolution")
    train.add_argument("--toy", action=argparse.BooleanOptionalAction, default=None, help="Use the small network")
    train.add_argument("--use-rct", action=argparse.BooleanOptionalAction, default=None, help="Red channel tuner")
    train.add_argument("--use-rcm", action=argparse.BooleanOptionalAction, default=None,
                       help="Residual communication modules")
    train.add_argument("--lr", type=float, help="Learning rate")
    train.add_argument("--batch", type=int, help="Batch size")
    train.add_argument("--warmup-iters", type=int, help="Supervised warm-up iterations")
    train.add_argument("--total-iters", type=int, help="Total optimizer steps including warm-up")
    train.add_argument("--sup-block", type=int, help="Supervised iterations per interleave block")
    train.add_argument("--unsup-block", type=int, help="Unsupervised iterations per interleave block")
    train.add_argument("--semi-supervised", action=argparse.BooleanOptionalAction, default=None,
                       help="Interleave unsupervised blocks after the warm-up")
    train.add_argument("--alpha-low", type=float, help="Lower bound of the re-degradation factor")
    train.add_argument("--alpha-high", type=float, help="Upper bound of the re-degradation factor")
    train.add_argument("--checkpoint-every", type=int, help="Checkpoint interval")
    train.add_argument("--val-every", type=int, help="Validation interval (0 disables)")
    train.add_argument("--lambda1", type=float, help="Backward loss weight")
    train.add_argument("--lambda2", type=float, help="Ambient supervision weight")
    train.add_argument("--lambda3", type=float, help="Gray-world weight")
    train.add_argument("--lambda-unsup", type=float, help="Unsupervised objective weight")
    train.add_argument("--double", action=argparse.BooleanOptionalAction, default=None, help="Train in float64")
    train.add_argument("--seed", type=int, help="Random seed")

    evaluate = commands.add_parser("eval", help="Compute metrics over a directory of enhanced images")
    evaluate.add_argument("--enhanced-dir", required=True, help="Enhanced images")
    evaluate.add_argument("--reference-dir", help="References paired by stem")
    evaluate.add_argument("--depth-dir", help="Depth maps paired by stem")
    evaluate.add_argument("--transmission-dir", help="Transmission maps (<id>.npy) paired by stem")
    evaluate.add_argument("--output-csv", required=True, help="Metric CSV path")
    evaluate.add_argument("--pcc-channel", choices=("R", "G", "B"), default="R", help="Transmission channel for PCC")

    check = commands.add_parser("ingest-check", help="Validate a dataset directory")
    check.add_argument("--root", required=True, help="Dataset root")
    check.add_argument("--manifest", help="Write the manifest JSON here")
    return parser


def _overrides(args: argparse.Namespace, names) -> Dict:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


RUN_FLAGS = (
    "input_dir", "output_dir", "checkpoint", "t_floor", "patch", "omega", "top_frac", "gf_radius",
    "gf_eps", "refine", "bins", "retinex_scales", "full_reference", "no_reference", "transmission",
    "pcc_channel", "workers", "seed",
)
TRAIN_FLAGS = (
    "labeled_dir", "unlabeled_dir", "validation_dir", "output_dir", "input_size", "toy", "use_rct",
    "use_rcm", "lr", "batch", "warmup_iters", "total_iters", "sup_block", "unsup_block",
    "semi_supervised", "alpha_low", "alpha_high", "checkpoint_every", "val_every", "lambda1",
    "lambda2", "lambda3", "lambda_unsup", "double", "seed",
)


def _run_command(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_sources(args.method, args.config, _overrides(args, RUN_FLAGS))
    cfg.validate()
    if not cfg.input_dir:
        raise ConfigurationError("--input-dir is required (or RUN_INPUT_DIR in the config file)")
    manifest = ingest(cfg.input_dir, validate=False)
    if args.command == "enhance":
        _, status = run_enhance(cfg, manifest)
    else:
        _, status = run_estimate(cfg, manifest)
    return status


def _train_command(args: argparse.Namespace) -> int:
    cfg = TrainConfig.from_sources(args.config, _overrides(args, TRAIN_FLAGS))
    missing = cfg.missing_inputs()
    if missing:
        raise ConfigurationError(f"Missing required settings: {', '.join(missing)}")
    labeled = ingest(cfg.labeled_dir)
    unlabeled: Optional[DatasetManifest] = ingest(cfg.unlabeled_dir) if cfg.unlabeled_dir else None
    validation = ingest(cfg.validation_dir) if cfg.validation_dir else None
    _, checkpoints = run_train(cfg, labeled, unlabeled, validation)
    logger.info(f"Final checkpoint: {checkpoints[-1] if checkpoints else 'none'}")
    return EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    if args.command in ("enhance", "estimate"):
        return _run_command(args)
    if args.command == "synth":
        _, status = run_synth(
            args.clean_dir, args.depth_dir, args.beta, args.ambient, args.output_dir, args.seed, args.jitter
        )
        return status
    if args.command == "train":
        return _train_command(args)
    if args.command == "eval":
        _, status = run_eval(
            args.enhanced_dir,
            args.output_csv,
            reference_dir=args.reference_dir,
            depth_dir=args.depth_dir,
            transmission_dir=args.transmission_dir,
            pcc_channel=args.pcc_channel,
        )
        return status
    try:
        _, status = ingest_check(args.root, args.manifest)
    except (ImageLoadError, PairingError) as e:
        logger.error(f"Dataset check failed: {e}")
        return EXIT_ITEM_FAILURES
    return status


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)

    logger.info("=" * 60)
    logger.info(f"Command: {args.command}")
    logger.info(f"Working directory: {os.getcwd()}")
    logger.info("=" * 60)

    try:
        Config.validate()
        status = dispatch(args)
    except ToolkitError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_ITEM_FAILURES

    logger.info(f"Finished {args.command} with exit code {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
