"""Training loop for the patch generators.

The loss is the mean absolute difference between the generated and true
posterior patches.  Patches arrive already radially weighted (they are
crops of normalized depth images), so this equals the planner's own
patch distance; the two sides must agree to 1e-6 on identical data.

The "denoise" mode trains on priors with the per-action mean difference
added (read from a moldkit model directory), targeting the same
posteriors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .dimgio import read_dimg
from .unet import GeneratorSpec, PatchGenerator


class TrainConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 500
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    seed: int = 0


def weighted_mae(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference; the radial weights live in the data."""
    return (pred - target).abs().mean()


def load_pairs(priors_path: str | Path, posteriors_path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    priors = read_dimg(priors_path)
    posteriors = read_dimg(posteriors_path)
    if priors.shape != posteriors.shape:
        raise TrainConfigError(
            f"prior/posterior stacks disagree: {priors.shape} vs {posteriors.shape}"
        )
    return priors, posteriors


def load_delta(model_dir: str | Path, dims: tuple[int, int]) -> np.ndarray:
    """Mean difference from a moldkit patch-model directory."""
    delta = read_dimg(Path(model_dir) / "delta.dimg")[0]
    if delta.shape != (dims[1], dims[0]):
        raise TrainConfigError(
            f"delta {delta.shape} does not match patch dims {(dims[1], dims[0])}"
        )
    return delta


def train(
    priors: np.ndarray,
    posteriors: np.ndarray,
    spec: GeneratorSpec,
    config: TrainConfig = TrainConfig(),
    delta: np.ndarray | None = None,
    log=None,
) -> tuple[PatchGenerator, list[float]]:
    """Fit a generator; returns the model and the per-epoch loss log."""
    n, h, w = priors.shape
    if n < 5:
        raise TrainConfigError(f"need at least 5 training pairs, got {n}")
    if (w, h) != (spec.width, spec.height):
        raise TrainConfigError(f"patch dims {(w, h)} do not match spec {(spec.width, spec.height)}")
    if spec.mode == "denoise":
        if delta is None:
            raise TrainConfigError("denoise mode needs the per-action mean difference")
        inputs = priors + delta[None]
    else:
        inputs = priors

    torch.manual_seed(config.seed)
    model = PatchGenerator(spec)
    optim = torch.optim.Adam(
        model.parameters(),
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
    )
    x = torch.from_numpy(inputs).float().unsqueeze(1)
    y = torch.from_numpy(posteriors).float().unsqueeze(1)
    order_rng = np.random.default_rng(config.seed)

    losses = []
    model.train()
    for epoch in range(config.epochs):
        perm = order_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            optim.zero_grad()
            pred = model(x[idx])
            loss = weighted_mae(pred, y[idx])
            loss.backward()
            optim.step()
            epoch_loss += float(loss.detach()) * len(idx)
        losses.append(epoch_loss / n)
        if log is not None:
            log(epoch, losses[-1])
    model.eval()
    return model, losses


def save_model(path: str | Path, model: PatchGenerator, losses: list[float]) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "spec": {
                "width": model.spec.width,
                "height": model.spec.height,
                "mode": model.spec.mode,
            },
            "spec_hash": model.spec.hash(),
            "final_loss": losses[-1] if losses else None,
        },
        path,
    )


def load_model(path: str | Path) -> PatchGenerator:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    spec = GeneratorSpec(**payload["spec"])
    if payload.get("spec_hash") != spec.hash():
        raise TrainConfigError(f"{path}: architecture hash mismatch")
    model = PatchGenerator(spec)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def save_loss_log(path: str | Path, losses: list[float]) -> None:
    with open(path, "w", encoding="ascii") as f:
        json.dump({"epoch_loss": losses}, f, indent=1)
        f.write("\n")
