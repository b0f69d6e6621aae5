"""Encoder-decoder patch generator.

Four downscale stages (two 3x3 convolutions, then 2x2 max-pool; 32, 64,
128 and 256 filters), a 512-filter bottleneck stage, and four upscale
steps whose outputs are concatenated with the matching encoder features
before two more 3x3 convolutions (256, 128, 64, 32 filters).  A final 1x1
convolution with tanh produces the patch, mapped from [-1, 1] to [0, 1].
ReLU everywhere else, all strides 1.

Patch sizes are free, so inputs are reflection-padded up to the next
multiple of 16 (four pooling levels) and the output is cropped back.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

ENCODER_FILTERS = (32, 64, 128, 256)
BOTTLENECK_FILTERS = 512
DECODER_FILTERS = (256, 128, 64, 32)
POOL_LEVELS = 4


@dataclass(frozen=True)
class GeneratorSpec:
    """Architecture contract for one patch generator."""

    width: int
    height: int
    mode: str = "direct"  # "direct" maps priors, "denoise" maps prior + delta

    @property
    def padded(self) -> tuple[int, int]:
        m = 1 << POOL_LEVELS
        return (-(-self.width // m) * m, -(-self.height // m) * m)

    def hash(self) -> str:
        payload = {
            "spec": asdict(self),
            "encoder": list(ENCODER_FILTERS),
            "bottleneck": BOTTLENECK_FILTERS,
            "decoder": list(DECODER_FILTERS),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _double_conv(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=1, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, stride=1, padding=1),
        nn.ReLU(inplace=True),
    )


class PatchGenerator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        self.encoders = nn.ModuleList()
        c = 1
        for filters in ENCODER_FILTERS:
            self.encoders.append(_double_conv(c, filters))
            c = filters
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _double_conv(c, BOTTLENECK_FILTERS)
        self.decoders = nn.ModuleList()
        c = BOTTLENECK_FILTERS
        for filters, skip in zip(DECODER_FILTERS, reversed(ENCODER_FILTERS)):
            self.decoders.append(_double_conv(c + skip, filters))
            c = filters
        self.head = nn.Conv2d(c, 1, 1, stride=1)

    def _pad(self, x: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        pw, ph = self.spec.padded
        dh, dw = ph - x.shape[-2], pw - x.shape[-1]
        if dh == 0 and dw == 0:
            return x, (0, 0)
        # Reflection padding needs pad < dim; tiny patches fall back to
        # replication.
        mode = "reflect" if dw < x.shape[-1] and dh < x.shape[-2] else "replicate"
        return F.pad(x, (0, dw, 0, dh), mode=mode), (dh, dw)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2], x.shape[-1]
        x, _ = self._pad(x)
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = dec(torch.cat([x, skip], dim=1))
        x = torch.tanh(self.head(x))
        out = (x + 1.0) * 0.5  # tanh range to unit interval
        return out[..., :h, :w]
