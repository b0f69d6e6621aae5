"""DIMG batch container, the interchange format shared with moldkit.

Layout: magic "DIMG", version u16 = 1, frame count u32, height u32,
width u32 (all little-endian), then count * height * width float64
values, row-major, little-endian.  Implemented here independently so this
package touches the planner only through files.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DIMG"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")


class DimgError(ValueError):
    pass


def write_dimg(path: str | Path, frames: np.ndarray) -> None:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3:
        raise DimgError(f"DIMG payload must be (n, h, w), got {frames.shape}")
    n, h, w = frames.shape
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, h, w))
        f.write(frames.astype("<f8").tobytes())
    os.replace(tmp, path)


def read_dimg(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DimgError(f"{path}: truncated DIMG header")
    magic, version, n, h, w = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DimgError(f"{path}: bad DIMG magic {magic!r}")
    if version != VERSION:
        raise DimgError(f"{path}: unsupported DIMG version {version}")
    expected = _HEADER.size + n * h * w * 8
    if len(data) != expected:
        raise DimgError(f"{path}: payload size {len(data)} != expected {expected}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, h, w).copy()
