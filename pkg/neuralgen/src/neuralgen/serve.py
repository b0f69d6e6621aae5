"""Serve a trained generator over the file-exchange protocol.

One request is in flight per directory: the client writes req.dimg, the
server answers with resp.dimg followed by a `done` sentinel, or writes an
`error` file with a message.  Files appear atomically (temp + rename).
"""

from __future__ import annotations

import os
import time
from pathlib import Path

import numpy as np
import torch

from .dimgio import DimgError, read_dimg, write_dimg
from .unet import PatchGenerator

REQUEST_NAME = "req.dimg"
RESPONSE_NAME = "resp.dimg"
DONE_NAME = "done"
ERROR_NAME = "error"


def predict_batch(model: PatchGenerator, batch: np.ndarray) -> np.ndarray:
    x = torch.from_numpy(np.asarray(batch, dtype=np.float64)).float().unsqueeze(1)
    with torch.no_grad():
        out = model(x)
    return out.squeeze(1).double().numpy()


def _write_error(directory: Path, message: str) -> None:
    tmp = directory / (ERROR_NAME + ".tmp")
    tmp.write_text(message + "\n")
    os.replace(tmp, directory / ERROR_NAME)


def serve_once(model: PatchGenerator, watch_dir: str | Path, timeout: float = 60.0, poll: float = 0.02) -> bool:
    """Answer one request; returns False if none arrived in time."""
    d = Path(watch_dir)
    req = d / REQUEST_NAME
    deadline = time.monotonic() + timeout
    while not req.exists():
        if time.monotonic() > deadline:
            return False
        time.sleep(poll)
    try:
        batch = read_dimg(req)
        expected = (model.spec.height, model.spec.width)
        if batch.shape[1:] != expected:
            raise DimgError(f"request frames {batch.shape[1:]} do not match model {expected}")
        out = predict_batch(model, batch) if batch.shape[0] else batch
    except Exception as e:  # noqa: BLE001 - reported across the process boundary
        _write_error(d, f"{type(e).__name__}: {e}")
        req.unlink(missing_ok=True)
        return True
    req.unlink(missing_ok=True)
    write_dimg(d / RESPONSE_NAME, out)
    tmp = d / (DONE_NAME + ".tmp")
    tmp.write_text("")
    os.replace(tmp, d / DONE_NAME)
    return True


def serve_forever(model: PatchGenerator, watch_dir: str | Path, poll: float = 0.02, stop=None) -> None:
    while stop is None or not stop.is_set():
        serve_once(model, watch_dir, timeout=0.25, poll=poll)
