"""Dual-stream network estimating IFM parameters.

The Red Channel Tuner rescales the red channel, a CNN encoder-decoder
(T-Stream) predicts per-channel transmission maps, a transformer
(A-Stream) predicts the ambient light from an extra Ambient token, and
Residual Communication Modules exchange features between the encoder
levels and the transformer blocks.
"""
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from utils.errors import ConfigurationError, DimensionError

NUM_LEVELS = 5


@dataclass
class NetConfig:
    """Architecture hyperparameters."""
    
    input_size: int = 256
    rct_filters: int = 16
    enc_dec_filters: Tuple[int, ...] = (64, 128, 256, 512, 512, 256, 128, 64, 64)
    token_dim: int = 384
    heads: int = 6
    transformer_blocks: int = 5
    patch_stride: int = 16
    rcm_levels: Tuple[int, ...] = (2, 3, 4, 5)
    mlp_ratio: int = 4
    use_rct: bool = True
    use_rcm: bool = True
    
    def __post_init__(self):
        self.enc_dec_filters = tuple(int(f) for f in self.enc_dec_filters)
        self.rcm_levels = tuple(sorted(int(k) for k in self.rcm_levels))
    
    @classmethod
    def toy(cls, **overrides) -> "NetConfig":
        """Small configuration for tests and desk-scale runs."""
        values = dict(
            input_size=32,
            rct_filters=4,
            enc_dec_filters=(4, 8, 16, 32, 32, 16, 8, 4, 4),
            token_dim=32,
            heads=2,
        )
        values.update(overrides)
        return cls(**values)
    
    @classmethod
    def from_dict(cls, values: Dict) -> "NetConfig":
        return cls(**values)
    
    def to_dict(self) -> Dict:
        values = asdict(self)
        values["enc_dec_filters"] = list(self.enc_dec_filters)
        values["rcm_levels"] = list(self.rcm_levels)
        return values
    
    @property
    def grid_size(self) -> int:
        return self.input_size // self.patch_stride
    
    def validate(self) -> bool:
        """Validate the configuration."""
        counts = [self.input_size, self.rct_filters, self.token_dim, self.heads,
                  self.transformer_blocks, self.patch_stride, self.mlp_ratio]
        if any(c < 1 for c in counts) or any(f < 1 for f in self.enc_dec_filters):
            raise ConfigurationError("all network counts must be >= 1")
        if len(self.enc_dec_filters) != 2 * NUM_LEVELS - 1:
            raise ConfigurationError(f"enc_dec_filters needs {2 * NUM_LEVELS - 1} entries, got {len(self.enc_dec_filters)}")
        if self.input_size % 2 ** (NUM_LEVELS - 1) != 0:
            raise ConfigurationError(f"input_size {self.input_size} must be divisible by {2 ** (NUM_LEVELS - 1)}")
        if self.input_size % self.patch_stride != 0:
            raise ConfigurationError(f"input_size {self.input_size} must be divisible by patch_stride {self.patch_stride}")
        if self.token_dim % self.heads != 0:
            raise ConfigurationError(f"token_dim {self.token_dim} must be divisible by heads {self.heads}")
        for level in self.rcm_levels:
            if not 2 <= level <= NUM_LEVELS:
                raise ConfigurationError(f"rcm level {level} outside 2..{NUM_LEVELS}")
            if level - 1 > self.transformer_blocks:
                raise ConfigurationError(f"rcm level {level} needs transformer block {level - 1}")
        return True


@dataclass
class NetOutput:
    """Network estimates for a batch."""
    
    t_hat: torch.Tensor
    a_hat: torch.Tensor
    rct_weight: torch.Tensor


class DoubleConv(nn.Sequential):
    """Two 3x3 Conv-BN-ReLU operations."""
    
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
        )


class RedChannelTuner(nn.Module):
    """Learns a per-image weight w in (0, 1) and scales red by 2w."""
    
    def __init__(self, filters: int):
        super().__init__()
        self.conv = nn.Conv2d(3, filters, 3, padding=1)
        self.fc = nn.Linear(filters, 1)
    
    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        pooled = self.conv(x).mean(dim=(2, 3))
        weight = torch.sigmoid(self.fc(pooled)).squeeze(1)
        red = x[:, :1] * (2.0 * weight).view(-1, 1, 1, 1)
        return torch.cat([red, x[:, 1:]], dim=1), weight


class TStream(nn.Module):
    """Encoder-decoder predicting per-channel transmission maps."""
    
    def __init__(self, filters: Tuple[int, ...]):
        super().__init__()
        enc = filters[:NUM_LEVELS]
        dec = filters[NUM_LEVELS:]
        self.encoders = nn.ModuleList()
        in_channels = 3
        for out_channels in enc:
            self.encoders.append(DoubleConv(in_channels, out_channels))
            in_channels = out_channels
        self.decoders = nn.ModuleList()
        for i, out_channels in enumerate(dec):
            skip = enc[NUM_LEVELS - 2 - i]
            self.decoders.append(DoubleConv(in_channels + skip, out_channels))
            in_channels = out_channels
        self.head = nn.Conv2d(in_channels, 3, 1)
    
    @staticmethod
    def check_size(x: torch.Tensor) -> None:
        factor = 2 ** (NUM_LEVELS - 1)
        if x.dim() != 4 or x.shape[1] != 3:
            raise DimensionError(f"expected a (B, 3, H, W) batch, got {tuple(x.shape)}")
        if x.shape[2] % factor or x.shape[3] % factor:
            raise DimensionError(f"spatial size {tuple(x.shape[2:])} must be divisible by {factor}")
    
    def encode(self, level: int, x: torch.Tensor) -> torch.Tensor:
        """Run encoder level `level` (1-based); levels above 1 max-pool first."""
        if level > 1:
            x = F.max_pool2d(x, 2)
        return self.encoders[level - 1](x)
    
    def decode(self, features: List[torch.Tensor]) -> torch.Tensor:
        x = features[-1]
        for i, decoder in enumerate(self.decoders):
            skip = features[NUM_LEVELS - 2 - i]
            x = F.interpolate(x, size=skip.shape[2:], mode="bilinear", align_corners=False)
            x = decoder(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.head(x))
    
    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        self.check_size(x)
        features = [self.encode(1, x)]
        for level in range(2, NUM_LEVELS + 1):
            features.append(self.encode(level, features[-1]))
        return self.decode(features), features


class Attention(nn.Module):
    """Multi-head self-attention."""
    
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)
    
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, d // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class TransformerBlock(nn.Module):
    """Pre-norm block: MHSA and a two-layer MLP, each with a residual."""
    
    def __init__(self, dim: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * mlp_ratio),
            nn.GELU(),
            nn.Linear(dim * mlp_ratio, dim),
        )
    
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class AStream(nn.Module):
    """Transformer predicting the ambient light from the Ambient token."""
    
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.stride = cfg.patch_stride
        self.grid = (cfg.grid_size, cfg.grid_size)
        num_patches = cfg.grid_size ** 2
        self.proj = nn.Linear(cfg.enc_dec_filters[0], cfg.token_dim)
        self.pos_embed = nn.Parameter(torch.zeros(1, num_patches, cfg.token_dim))
        self.ambient_token = nn.Parameter(torch.zeros(1, 1, cfg.token_dim))
        self.blocks = nn.ModuleList(
            [TransformerBlock(cfg.token_dim, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.transformer_blocks)]
        )
        self.head = nn.Linear(cfg.token_dim, 3)
    
    def patchify(self, enc1: torch.Tensor) -> torch.Tensor:
        """Pool Enc_1 features into patch tokens and prepend the Ambient token."""
        height, width = enc1.shape[2:]
        if height % self.stride or width % self.stride:
            raise DimensionError(f"Enc_1 size {(height, width)} not divisible by patch stride {self.stride}")
        if (height // self.stride, width // self.stride) != self.grid:
            raise DimensionError(
                f"token grid {(height // self.stride, width // self.stride)} does not match configured {self.grid}"
            )
        pooled = F.avg_pool2d(enc1, self.stride)
        tokens = self.proj(pooled.flatten(2).transpose(1, 2)) + self.pos_embed
        ambient = self.ambient_token.expand(enc1.shape[0], -1, -1)
        return torch.cat([ambient, tokens], dim=1)
    
    def estimate(self, tokens: torch.Tensor) -> torch.Tensor:
        """Decode the Ambient token into the ambient light."""
        return torch.sigmoid(self.head(tokens[:, 0]))
    
    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            tokens = block(tokens)
        return self.estimate(tokens)


class ResidualCommunicationModule(nn.Module):
    """Residual feature exchange between one encoder level and the token sequence."""
    
    def __init__(self, enc_channels: int, token_dim: int):
        super().__init__()
        self.enc_channels = enc_channels
        self.token_dim = token_dim
        total = enc_channels + token_dim
        self.mix = nn.Conv2d(total, total, 1)
    
    def forward(
        self,
        enc: torch.Tensor,
        tokens: torch.Tensor,
        grid: Tuple[int, int],
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        b, _, height, width = enc.shape
        spatial = tokens[:, 1:]
        if spatial.shape[1] != grid[0] * grid[1]:
            raise DimensionError(f"{spatial.shape[1]} spatial tokens do not fold onto grid {grid}")
        token_map = spatial.transpose(1, 2).reshape(b, self.token_dim, grid[0], grid[1])
        pooled = F.adaptive_avg_pool2d(enc, grid)
        
        mixed = self.mix(torch.cat([pooled, token_map], dim=1))
        enc_part, token_part = torch.split(mixed, [self.enc_channels, self.token_dim], dim=1)
        
        enc_out = enc + F.interpolate(enc_part, size=(height, width), mode="bilinear", align_corners=False)
        spatial_out = spatial + token_part.flatten(2).transpose(1, 2)
        return enc_out, torch.cat([tokens[:, :1], spatial_out], dim=1)


class PAUIENet(nn.Module):
    """Physics-aware dual-stream network returning (t_hat, a_hat, rct_weight)."""
    
    def __init__(self, cfg: Optional[NetConfig] = None):
        super().__init__()
        self.cfg = cfg or NetConfig()
        self.cfg.validate()
        self.rct = RedChannelTuner(self.cfg.rct_filters) if self.cfg.use_rct else None
        self.t_stream = TStream(self.cfg.enc_dec_filters)
        self.a_stream = AStream(self.cfg)
        levels = self.cfg.rcm_levels if self.cfg.use_rcm else ()
        self.rcms = nn.ModuleDict(
            {
                str(level): ResidualCommunicationModule(self.cfg.enc_dec_filters[level - 1], self.cfg.token_dim)
                for level in levels
            }
        )
        self.reset_parameters()
    
    def reset_parameters(self) -> None:
        """Kaiming-uniform convs, truncated-normal transformer weights, zero biases and RCMs."""
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_uniform_(module.weight, nonlinearity="relu")
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                nn.init.zeros_(module.bias)
        nn.init.trunc_normal_(self.a_stream.pos_embed, std=0.02)
        nn.init.trunc_normal_(self.a_stream.ambient_token, std=0.02)
        for rcm in self.rcms.values():
            nn.init.zeros_(rcm.mix.weight)
            nn.init.zeros_(rcm.mix.bias)
    
    def forward(self, img: torch.Tensor) -> NetOutput:
        TStream.check_size(img)
        if self.rct is not None:
            x, weight = self.rct(img)
        else:
            x, weight = img, img.new_full((img.shape[0],), 0.5)
        
        blocks = self.a_stream.blocks
        features = [self.t_stream.encode(1, x)]
        tokens = self.a_stream.patchify(features[0])
        for level in range(2, NUM_LEVELS + 1):
            enc = self.t_stream.encode(level, features[-1])
            block_index = level - 2
            if block_index < len(blocks):
                tokens = blocks[block_index](tokens)
            key = str(level)
            if key in self.rcms:
                enc, tokens = self.rcms[key](enc, tokens, self.a_stream.grid)
            features.append(enc)
        for block in blocks[NUM_LEVELS - 1:]:
            tokens = block(tokens)
        
        t_hat = self.t_stream.decode(features)
        a_hat = self.a_stream.estimate(tokens)
        return NetOutput(t_hat=t_hat, a_hat=a_hat, rct_weight=weight)
    
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
