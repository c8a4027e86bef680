"""Configuration management for the enhancement toolkit.

Defaults come from the environment (`.env`, loaded with python-dotenv).
A run may add a dotenv-style config file whose keys are grouped into
method sections by prefix (DCP_*, UDCP_*, HE_*, RETINEX_*, PAUIENET_*,
RUN_*, TRAIN_*, NET_*, LOSS_*). Command-line flags override both.
"""
import os
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from utils.errors import ConfigurationError

load_dotenv()


def _env_list(name: str, default: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in os.getenv(name, default).split(",") if v.strip())


class Config:
    """Application configuration."""
    
    # Logging
    LOG_DIR = os.getenv("LOG_DIR", "logs")
    
    # Image formation
    T_FLOOR = float(os.getenv("T_FLOOR", "0.05"))
    
    # Dark channel priors
    DCP_PATCH = int(os.getenv("DCP_PATCH", "15"))
    DCP_OMEGA = float(os.getenv("DCP_OMEGA", "0.95"))
    DCP_TOP_FRAC = float(os.getenv("DCP_TOP_FRAC", "0.001"))
    GF_RADIUS = int(os.getenv("GF_RADIUS", "40"))
    GF_EPS = float(os.getenv("GF_EPS", "1e-3"))
    
    # Direct enhancers
    HE_BINS = int(os.getenv("HE_BINS", "256"))
    RETINEX_SCALES = _env_list("RETINEX_SCALES", "15,80,250")
    
    # Network and training
    INPUT_SIZE = int(os.getenv("INPUT_SIZE", "256"))
    LEARNING_RATE = float(os.getenv("LEARNING_RATE", "1e-4"))
    BATCH_SIZE = int(os.getenv("BATCH_SIZE", "6"))
    WARMUP_ITERS = int(os.getenv("WARMUP_ITERS", "3000"))
    TOTAL_ITERS = int(os.getenv("TOTAL_ITERS", "150000"))
    SUP_BLOCK = int(os.getenv("SUP_BLOCK", "120"))
    UNSUP_BLOCK = int(os.getenv("UNSUP_BLOCK", "30"))
    CHECKPOINT_EVERY = int(os.getenv("CHECKPOINT_EVERY", "5000"))
    
    # Batch runs
    WORKERS = int(os.getenv("WORKERS", "4"))
    SEED = int(os.getenv("SEED", "0"))
    
    @classmethod
    def validate(cls):
        """Validate configuration."""
        if not 0.0 < cls.T_FLOOR < 1.0:
            raise ConfigurationError("T_FLOOR must be in (0, 1)")
        
        if cls.DCP_PATCH < 1 or cls.DCP_PATCH % 2 == 0:
            raise ConfigurationError("DCP_PATCH must be an odd positive integer")
        
        if not 0.0 < cls.DCP_OMEGA <= 1.0:
            raise ConfigurationError("DCP_OMEGA must be in (0, 1]")
        
        if cls.HE_BINS < 2:
            raise ConfigurationError("HE_BINS must be at least 2")
        
        if cls.WORKERS < 1:
            raise ConfigurationError("WORKERS must be positive")
        
        return True


METHODS = ("dcp", "udcp", "he", "retinex", "grayworld", "pauienet")


def _coerce(value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if kind is tuple:
        if isinstance(value, (list, tuple)):
            return tuple(float(v) for v in value)
        return tuple(float(v) for v in str(value).split(",") if v.strip())
    return kind(value)


def read_config_file(path: Optional[str]) -> Dict[str, str]:
    """Read a KEY=value run config file (empty dict when no path is given)."""
    if not path:
        return {}
    if not os.path.isfile(path):
        raise ConfigurationError(f"Config file not found: {path}")
    return {k.upper(): v for k, v in dotenv_values(path).items() if v is not None}


def _merge(instance, file_values: Dict[str, str], keys: Dict[str, str], overrides: Optional[Dict]):
    kinds = {f.name: f.metadata.get("kind", type(getattr(instance, f.name))) for f in fields(instance)}
    try:
        for name, key in keys.items():
            if key in file_values:
                setattr(instance, name, _coerce(file_values[key], kinds[name]))
        for name, value in (overrides or {}).items():
            if value is None:
                continue
            if name not in kinds:
                raise ConfigurationError(f"Unknown setting: {name}")
            setattr(instance, name, _coerce(value, kinds[name]))
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"Invalid config value: {e}")
    return instance


@dataclass
class RunConfig:
    """Settings of one enhance/estimate/eval run."""
    
    method: str = "dcp"
    input_dir: str = ""
    output_dir: str = "results"
    checkpoint: str = ""
    t_floor: float = Config.T_FLOOR
    patch: int = Config.DCP_PATCH
    omega: float = Config.DCP_OMEGA
    top_frac: float = Config.DCP_TOP_FRAC
    gf_radius: int = Config.GF_RADIUS
    gf_eps: float = Config.GF_EPS
    refine: bool = True
    bins: int = Config.HE_BINS
    retinex_scales: Tuple[float, ...] = field(default=Config.RETINEX_SCALES, metadata={"kind": tuple})
    full_reference: bool = True
    no_reference: bool = True
    transmission: bool = True
    pcc_channel: str = "R"
    seed: int = Config.SEED
    workers: int = Config.WORKERS
    
    @classmethod
    def from_sources(
        cls,
        method: str,
        config_file: Optional[str] = None,
        overrides: Optional[Dict] = None,
    ) -> "RunConfig":
        """Build a run config: defaults < config file < overrides."""
        cfg = cls(method=method)
        file_values = read_config_file(config_file)
        section = method.upper()
        keys = {
            "input_dir": "RUN_INPUT_DIR",
            "output_dir": "RUN_OUTPUT_DIR",
            "t_floor": "RUN_T_FLOOR",
            "full_reference": "RUN_FULL_REFERENCE",
            "no_reference": "RUN_NO_REFERENCE",
            "transmission": "RUN_TRANSMISSION",
            "pcc_channel": "RUN_PCC_CHANNEL",
            "seed": "RUN_SEED",
            "workers": "RUN_WORKERS",
            "checkpoint": "PAUIENET_CHECKPOINT",
            "bins": "HE_BINS",
            "retinex_scales": "RETINEX_SCALES",
        }
        if method in ("dcp", "udcp"):
            for name in ("patch", "omega", "top_frac", "gf_radius", "gf_eps", "refine"):
                keys[name] = f"{section}_{name.upper()}"
        return _merge(cfg, file_values, keys, overrides)
    
    def validate(self) -> bool:
        """Validate method parameters before any file is written."""
        if self.method not in METHODS:
            raise ConfigurationError(f"Unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not 0.0 < self.t_floor < 1.0:
            raise ConfigurationError(f"t_floor must be in (0, 1), got {self.t_floor}")
        if self.method in ("dcp", "udcp"):
            if self.patch < 1 or self.patch % 2 == 0:
                raise ConfigurationError(f"patch must be odd and >= 1, got {self.patch}")
            if not 0.0 < self.omega <= 1.0:
                raise ConfigurationError(f"omega must be in (0, 1], got {self.omega}")
            if not 0.0 < self.top_frac <= 1.0:
                raise ConfigurationError(f"top_frac must be in (0, 1], got {self.top_frac}")
            if self.gf_radius < 1 or self.gf_eps <= 0:
                raise ConfigurationError("guided filter radius must be >= 1 and eps > 0")
        if self.method == "he" and self.bins < 2:
            raise ConfigurationError(f"bins must be >= 2, got {self.bins}")
        if self.method == "retinex" and (not self.retinex_scales or min(self.retinex_scales) <= 0):
            raise ConfigurationError(f"retinex scales must be positive, got {self.retinex_scales}")
        if self.method == "pauienet":
            if not self.checkpoint:
                raise ConfigurationError("method pauienet needs a checkpoint (--checkpoint)")
            if not os.path.isfile(self.checkpoint):
                raise ConfigurationError(f"Checkpoint not found: {self.checkpoint}")
        if self.pcc_channel.upper() not in ("R", "G", "B"):
            raise ConfigurationError(f"pcc_channel must be R, G or B, got {self.pcc_channel}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        return True


@dataclass
class TrainConfig:
    """Settings of one training run."""
    
    labeled_dir: str = ""
    unlabeled_dir: str = ""
    validation_dir: str = ""
    output_dir: str = "runs"
    input_size: int = Config.INPUT_SIZE
    toy: bool = False
    use_rct: bool = True
    use_rcm: bool = True
    lr: float = Config.LEARNING_RATE
    batch: int = Config.BATCH_SIZE
    warmup_iters: int = Config.WARMUP_ITERS
    total_iters: int = Config.TOTAL_ITERS
    sup_block: int = Config.SUP_BLOCK
    unsup_block: int = Config.UNSUP_BLOCK
    semi_supervised: bool = True
    alpha_low: float = 0.5
    alpha_high: float = 0.9
    checkpoint_every: int = Config.CHECKPOINT_EVERY
    val_every: int = 0
    lambda1: float = 0.001
    lambda2: float = 0.005
    lambda3: float = 10.0
    lambda_unsup: float = 0.001
    double: bool = False
    seed: int = Config.SEED
    
    @classmethod
    def from_sources(cls, config_file: Optional[str] = None, overrides: Optional[Dict] = None) -> "TrainConfig":
        cfg = cls()
        file_values = read_config_file(config_file)
        keys: Dict[str, str] = {}
        for f in fields(cls):
            if f.name.startswith("lambda"):
                keys[f.name] = f"LOSS_{f.name.upper()}"
            elif f.name in ("input_size", "toy", "use_rct", "use_rcm"):
                keys[f.name] = f"NET_{f.name.upper()}"
            else:
                keys[f.name] = f"TRAIN_{f.name.upper()}"
        return _merge(cfg, file_values, keys, overrides)
    
    def missing_inputs(self) -> List[str]:
        return [name for name in ("labeled_dir",) if not getattr(self, name)]
