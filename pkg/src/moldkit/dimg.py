"""DIMG frame container and the file-exchange predictor protocol.

DIMG is the interchange format for batches of real-valued image patches:

    bytes 0..3   magic "DIMG"
    bytes 4..5   version, u16 little-endian (currently 1)
    bytes 6..9   frame count, u32 little-endian
    bytes 10..13 frame height, u32 little-endian
    bytes 14..17 frame width, u32 little-endian
    then count * height * width float64 values, row-major, little-endian

External patch predictors are separate processes sharing a directory.  One
request is in flight per directory at a time:

    client writes  req.dimg    (batch of prior patches)
    server writes  resp.dimg   (same frame count and dims), then `done`
    server writes  error       (text) instead, if the request is bad

Files appear atomically (written to a temp name, then renamed).  The
client deletes resp.dimg and done once consumed; the server deletes
req.dimg once read.
"""

from __future__ import annotations

import os
import struct
import time
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, PredictorUnavailableError

__all__ = [
    "read_dimg",
    "write_dimg",
    "request_prediction",
    "respond_once",
    "REQUEST_NAME",
    "RESPONSE_NAME",
    "DONE_NAME",
    "ERROR_NAME",
]

MAGIC = b"DIMG"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")

REQUEST_NAME = "req.dimg"
RESPONSE_NAME = "resp.dimg"
DONE_NAME = "done"
ERROR_NAME = "error"


def write_dimg(path: str | Path, frames: np.ndarray) -> None:
    """Write an (n, h, w) batch; a single (h, w) frame is promoted to n=1."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3:
        raise ConfigError(f"DIMG payload must be (n, h, w), got shape {frames.shape}")
    n, h, w = frames.shape
    header = _HEADER.pack(MAGIC, VERSION, n, h, w)
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(frames.astype("<f8").tobytes())
    os.replace(tmp, path)


def read_dimg(path: str | Path) -> np.ndarray:
    """Read a DIMG file back into an (n, h, w) float64 array."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigError(f"{path}: truncated DIMG header")
    magic, version, n, h, w = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad DIMG magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported DIMG version {version}")
    expected = _HEADER.size + n * h * w * 8
    if len(data) != expected:
        raise ConfigError(f"{path}: DIMG payload size {len(data)} != expected {expected}")
    frames = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, h, w)
    return frames.astype(np.float64)


def request_prediction(
    exchange_dir: str | Path,
    priors: np.ndarray,
    timeout: float = 60.0,
    poll: float = 0.02,
) -> np.ndarray:
    """Send a batch to the external predictor serving exchange_dir.

    Blocks until the response arrives; raises PredictorUnavailableError on
    timeout, on a server-side error file, or on a malformed response.
    """
    d = Path(exchange_dir)
    if not d.is_dir():
        raise PredictorUnavailableError(f"exchange directory {d} does not exist")
    priors = np.asarray(priors, dtype=np.float64)
    if priors.ndim == 2:
        priors = priors[None]
    for name in (RESPONSE_NAME, DONE_NAME, ERROR_NAME):
        (d / name).unlink(missing_ok=True)
    write_dimg(d / REQUEST_NAME, priors)
    deadline = time.monotonic() + timeout
    while True:
        if (d / ERROR_NAME).exists():
            msg = (d / ERROR_NAME).read_text(errors="replace").strip()
            (d / ERROR_NAME).unlink(missing_ok=True)
            (d / REQUEST_NAME).unlink(missing_ok=True)
            raise PredictorUnavailableError(f"external predictor error: {msg}")
        if (d / DONE_NAME).exists():
            break
        if time.monotonic() > deadline:
            (d / REQUEST_NAME).unlink(missing_ok=True)
            raise PredictorUnavailableError(
                f"no response in {timeout:.0f}s from predictor at {d}"
            )
        time.sleep(poll)
    try:
        resp = read_dimg(d / RESPONSE_NAME)
    except (ConfigError, OSError) as e:
        raise PredictorUnavailableError(f"malformed predictor response: {e}") from e
    finally:
        for name in (RESPONSE_NAME, DONE_NAME):
            (d / name).unlink(missing_ok=True)
    if resp.shape != priors.shape:
        raise PredictorUnavailableError(
            f"predictor answered shape {resp.shape}, expected {priors.shape}"
        )
    return resp


def respond_once(
    exchange_dir: str | Path,
    fn: Callable[[np.ndarray], np.ndarray],
    timeout: float = 60.0,
    poll: float = 0.02,
) -> bool:
    """Serve one request in exchange_dir with fn(batch) -> batch.

    Returns True once a request was answered, False on timeout.  Problems
    reading the request or applying fn are reported through the error file
    so the client can surface them.  This is the reference server loop
    body; external predictor processes implement the same sequence.
    """
    d = Path(exchange_dir)
    req = d / REQUEST_NAME
    deadline = time.monotonic() + timeout
    while not req.exists():
        if time.monotonic() > deadline:
            return False
        time.sleep(poll)
    try:
        batch = read_dimg(req)
        out = np.asarray(fn(batch), dtype=np.float64)
        if out.shape != batch.shape:
            raise ConfigError(f"predictor produced shape {out.shape} for input {batch.shape}")
    except Exception as e:  # noqa: BLE001 - must cross the process boundary
        tmp = d / (ERROR_NAME + ".tmp")
        tmp.write_text(f"{type(e).__name__}: {e}\n")
        os.replace(tmp, d / ERROR_NAME)
        req.unlink(missing_ok=True)
        return True
    req.unlink(missing_ok=True)
    write_dimg(d / RESPONSE_NAME, out)
    (d / (DONE_NAME + ".tmp")).write_text("")
    os.replace(d / (DONE_NAME + ".tmp"), d / DONE_NAME)
    return True
