"""Patch-level action-effect predictors and their per-action artifacts.

For every action type a dataset of (prior, posterior) patch pairs yields:

  * delta: the elementwise mean of posterior - prior.  Adding it to a
    prior patch is the difference-compensation predictor (mode "D"), a
    training-free baseline.
  * mask: a boolean patch marking the pixels the action modifies the most,
    obtained by Otsu-thresholding |delta| (256 bins over [0, max|delta|])
    and eroding the result with a square structuring element.

A learned patch generator (an external process reached through the DIMG
file exchange) can replace the naive sum.  Its raw output is refined:
inside the mask the generator output is kept but shifted by the scalar
that restores its mean to the mean of prior + delta; outside the mask the
difference-compensation value is used verbatim.  Mode "CR" feeds the
generator the prior, mode "DCR" feeds it prior + delta (a denoising
arrangement).  Either way the refined output equals mode "D" off-mask,
bit for bit, and matches its on-mask mean exactly before clamping.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Protocol

import numpy as np
from scipy import ndimage

from .camera import CameraIntrinsics, build_weight_field
from .dimg import read_dimg, request_prediction, write_dimg
from .errors import ConfigError, DomainError, PredictorUnavailableError, ShapeError
from .metric import patch_distance
from .roi import Patch, RoiRect

__all__ = [
    "PatchDataset",
    "PatchModel",
    "BasePredictor",
    "MeanDiffPredictor",
    "ExternalPredictor",
    "RefinedPredictor",
    "PredictorBank",
    "mean_difference",
    "otsu_threshold",
    "build_mask",
    "fit_patch_model",
    "predict_D",
    "refine",
    "evaluate",
    "fold_indices",
    "crossval_report",
    "save_dataset",
    "load_dataset",
    "MODES",
]

MODES = ("D", "CR", "DCR")


@dataclass(frozen=True, eq=False)
class PatchDataset:
    """Prior/posterior patch pairs of one action, all sharing one rect
    shape and the camera that produced them."""

    action_name: str
    intrinsics: CameraIntrinsics
    rect: RoiRect
    priors: np.ndarray  # (n, h, w) in [0, 1]
    posteriors: np.ndarray  # (n, h, w) in [0, 1]

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        posteriors = np.asarray(self.posteriors, dtype=np.float64)
        if priors.ndim != 3 or priors.shape != posteriors.shape:
            raise ShapeError("priors and posteriors must be matching (n, h, w) stacks")
        if priors.shape[0] == 0:
            raise DomainError("a patch dataset cannot be empty")
        if priors.shape[1:] != (self.rect.height, self.rect.width):
            raise ShapeError("patch stack dims do not match the dataset rect")
        for stack in (priors, posteriors):
            if stack.min() < 0.0 or stack.max() > 1.0:
                raise DomainError("patch values must lie in [0, 1]")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "posteriors", posteriors)

    def __len__(self) -> int:
        return self.priors.shape[0]

    @property
    def pairs(self) -> Iterator[tuple[Patch, Patch]]:
        for k in range(len(self)):
            yield Patch(self.rect, self.priors[k]), Patch(self.rect, self.posteriors[k])

    def subset(self, idx) -> "PatchDataset":
        return PatchDataset(
            self.action_name, self.intrinsics, self.rect, self.priors[idx], self.posteriors[idx]
        )


@dataclass(frozen=True, eq=False)
class PatchModel:
    """Per-action artifacts: mean difference, refine mask, patch dims."""

    action_name: str
    delta: np.ndarray  # (h, w), may be negative
    mask: np.ndarray  # (h, w) boolean
    erosion_radius: int
    otsu_level: float

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if delta.shape != mask.shape:
            raise ShapeError("delta and mask shapes differ")
        if delta.size and (delta.min() < -1.0 or delta.max() > 1.0):
            raise DomainError("delta entries must lie in [-1, 1]")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "mask", mask)

    @property
    def dims(self) -> tuple[int, int]:
        """(width, height) of the patches this model applies to."""
        return (self.delta.shape[1], self.delta.shape[0])

    @property
    def degenerate(self) -> bool:
        """True when the mask is empty and refinement falls back to mode D."""
        return not bool(self.mask.any())

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_dimg(d / "delta.dimg", self.delta)
        write_dimg(d / "mask.dimg", self.mask.astype(np.float64))
        meta = {
            "action": self.action_name,
            "w": self.dims[0],
            "h": self.dims[1],
            "erosion_radius": self.erosion_radius,
            "otsu_threshold": self.otsu_level,
        }
        with open(d / "meta.json", "w", encoding="ascii") as f:
            json.dump(meta, f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, directory: str | Path) -> "PatchModel":
        d = Path(directory)
        try:
            meta = json.loads((d / "meta.json").read_text("ascii"))
            delta = read_dimg(d / "delta.dimg")[0]
            mask = read_dimg(d / "mask.dimg")[0] != 0.0
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load patch model from {d}: {e}") from e
        model = cls(
            action_name=str(meta["action"]),
            delta=delta,
            mask=mask,
            erosion_radius=int(meta["erosion_radius"]),
            otsu_level=float(meta["otsu_threshold"]),
        )
        if model.dims != (int(meta["w"]), int(meta["h"])):
            raise ConfigError(f"model dims {model.dims} disagree with meta.json in {d}")
        return model


def mean_difference(ds: PatchDataset) -> np.ndarray:
    """Elementwise mean of posterior - prior over the dataset."""
    return np.mean(ds.posteriors - ds.priors, axis=0)


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's threshold of nonnegative values, binned over [0, max].

    Returns the bin edge maximizing between-class variance; for a constant
    input (degenerate histogram) returns +inf so no pixel is selected.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    vmax = values.max() if values.size else 0.0
    if vmax <= 0.0 or values.min() == vmax:
        return float("inf")
    hist, edges = np.histogram(values, bins=bins, range=(0.0, vmax))
    p = hist.astype(np.float64) / values.size
    omega = np.cumsum(p)
    mu = np.cumsum(p * edges[:-1])
    mu_total = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = (mu_total * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b[~np.isfinite(sigma_b)] = -1.0
    k = int(np.argmax(sigma_b))
    return float(edges[k + 1])


def build_mask(delta: np.ndarray, erosion_radius: int = 1) -> tuple[np.ndarray, float]:
    """Select the most-modified pixels of a mean difference.

    Otsu thresholding runs on |delta| (absolute values, since an action can
    lower the surface while raising displaced ridges); the binary result is
    eroded with a (2r+1) x (2r+1) square element.  Returns (mask, level);
    a constant |delta| yields an empty mask and level = +inf.
    """
    mag = np.abs(np.asarray(delta, dtype=np.float64))
    level = otsu_threshold(mag)
    if not np.isfinite(level):
        return np.zeros(mag.shape, dtype=bool), level
    binary = mag > level
    if erosion_radius > 0:
        size = 2 * erosion_radius + 1
        binary = ndimage.binary_erosion(binary, structure=np.ones((size, size), dtype=bool))
    return binary, level


def fit_patch_model(ds: PatchDataset, erosion_radius: int = 1) -> PatchModel:
    delta = mean_difference(ds)
    mask, level = build_mask(delta, erosion_radius)
    return PatchModel(
        action_name=ds.action_name,
        delta=delta,
        mask=mask,
        erosion_radius=erosion_radius,
        otsu_level=level,
    )


def _clamp_unit(values: np.ndarray) -> tuple[np.ndarray, int]:
    clipped = np.clip(values, 0.0, 1.0)
    return clipped, int(np.count_nonzero(clipped != values))


def _check_dims(model: PatchModel, pixels: np.ndarray) -> None:
    if pixels.shape[-2:] != model.delta.shape:
        raise ShapeError(
            f"patch shape {pixels.shape[-2:]} does not match model {model.delta.shape}"
        )


def predict_D(model: PatchModel, prior: Patch) -> Patch:
    """Difference compensation: prior + delta, clamped into [0, 1]."""
    _check_dims(model, prior.pixels)
    out, saturated = _clamp_unit(prior.pixels + model.delta)
    return Patch(prior.rect, out, saturated=saturated)


def _refine_batch(model: PatchModel, base_out: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Pre-clamp refinement of a (n, h, w) generator batch."""
    targets = priors + model.delta[None]
    mask = model.mask
    mu = np.mean(targets[:, mask] - base_out[:, mask], axis=1)
    return np.where(mask[None], base_out + mu[:, None, None], targets)


def refine(base_out: Patch | np.ndarray, prior: Patch, model: PatchModel) -> Patch:
    """Refine a generator's output patch.

    On-mask pixels keep the generator values shifted by the offset that
    restores their mean to the mean of prior + delta (computed before
    clamping, so the restoration is exact); off-mask pixels are replaced by
    prior + delta.  An empty mask degenerates to difference compensation.
    """
    base = base_out.pixels if isinstance(base_out, Patch) else np.asarray(base_out, dtype=np.float64)
    _check_dims(model, prior.pixels)
    _check_dims(model, base)
    if model.degenerate:
        warnings.warn(
            f"empty refine mask for action {model.action_name!r}; "
            "falling back to difference compensation",
            stacklevel=2,
        )
        return predict_D(model, prior)
    refined = _refine_batch(model, base[None], prior.pixels[None])[0]
    out, saturated = _clamp_unit(refined)
    return Patch(prior.rect, out, saturated=saturated)


class BasePredictor(Protocol):
    """A patch-to-patch map over (n, h, w) batches."""

    def __call__(self, batch: np.ndarray) -> np.ndarray: ...


class MeanDiffPredictor:
    """Base predictor that adds the model's mean difference."""

    def __init__(self, model: PatchModel):
        self.model = model

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        _check_dims(self.model, batch)
        return batch + self.model.delta[None]


class ExternalPredictor:
    """Base predictor answered by a separate process via the DIMG exchange."""

    def __init__(self, exchange_dir: str | Path, timeout: float = 120.0):
        self.exchange_dir = Path(exchange_dir)
        self.timeout = timeout

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return request_prediction(self.exchange_dir, batch, timeout=self.timeout)


@dataclass
class RefinedPredictor:
    """One action's end-to-end patch predictor.

    mode "D" ignores the base generator entirely; "CR" refines
    base(prior); "DCR" refines base(prior + delta).  CR/DCR without a base
    raise PredictorUnavailableError rather than silently downgrading.
    """

    model: PatchModel
    mode: str = "D"
    base: BasePredictor | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown predictor mode {self.mode!r}")
        if self.mode in ("CR", "DCR") and self.base is None:
            raise PredictorUnavailableError(
                f"mode {self.mode} needs an external generator and none is configured"
            )

    def predict_batch(self, priors: np.ndarray) -> np.ndarray:
        priors = np.asarray(priors, dtype=np.float64)
        squeeze = priors.ndim == 2
        if squeeze:
            priors = priors[None]
        _check_dims(self.model, priors)
        if self.mode == "D" or self.model.degenerate:
            out = priors + self.model.delta[None]
        else:
            base_in = priors if self.mode == "CR" else priors + self.model.delta[None]
            base_out = np.asarray(self.base(base_in), dtype=np.float64)
            if base_out.shape != priors.shape:
                raise PredictorUnavailableError(
                    f"generator answered shape {base_out.shape}, expected {priors.shape}"
                )
            out = _refine_batch(self.model, base_out, priors)
        out, _ = _clamp_unit(out)
        return out[0] if squeeze else out

    def predict(self, prior: Patch) -> Patch:
        if self.mode == "D":
            return predict_D(self.model, prior)
        if self.model.degenerate:
            return refine(prior.pixels, prior, self.model)  # warns, falls back
        base_in = prior.pixels if self.mode == "CR" else prior.pixels + self.model.delta
        base_out = np.asarray(self.base(base_in[None]), dtype=np.float64)[0]
        return refine(base_out, prior, self.model)


class PredictorBank:
    """Predictors for a whole action set, keyed by action name.

    exchange_root, required for CR/DCR, holds one exchange subdirectory
    per action name.
    """

    def __init__(
        self,
        models: Mapping[str, PatchModel],
        mode: str = "D",
        exchange_root: str | Path | None = None,
        timeout: float = 120.0,
    ):
        if mode not in MODES:
            raise ConfigError(f"unknown predictor mode {mode!r}")
        self.mode = mode
        self._predictors: dict[str, RefinedPredictor] = {}
        for name, model in models.items():
            base = None
            if mode in ("CR", "DCR"):
                if exchange_root is None:
                    raise PredictorUnavailableError(
                        f"mode {mode} needs an exchange directory for action {name!r}"
                    )
                base = ExternalPredictor(Path(exchange_root) / name, timeout=timeout)
            self._predictors[name] = RefinedPredictor(model=model, mode=mode, base=base)

    def __contains__(self, name: str) -> bool:
        return name in self._predictors

    def predictor(self, action_name: str) -> RefinedPredictor:
        try:
            return self._predictors[action_name]
        except KeyError:
            raise ConfigError(f"no model loaded for action {action_name!r}") from None

    def predict(self, action_name: str, prior: Patch) -> Patch:
        return self.predictor(action_name).predict(prior)

    @classmethod
    def load(
        cls,
        model_root: str | Path,
        action_names,
        mode: str = "D",
        exchange_root: str | Path | None = None,
        timeout: float = 120.0,
    ) -> "PredictorBank":
        models = {name: PatchModel.load(Path(model_root) / name) for name in action_names}
        return cls(models, mode=mode, exchange_root=exchange_root, timeout=timeout)


def evaluate(ds_test: PatchDataset, predictor: RefinedPredictor) -> tuple[float, float]:
    """Mean and standard deviation, in mm, of the per-pair distance between
    predicted and true posterior patches."""
    if len(ds_test) == 0:
        raise DomainError("empty test set")
    preds = predictor.predict_batch(ds_test.priors)
    dists = [
        patch_distance(preds[k], ds_test.posteriors[k], ds_test.intrinsics).d_mm
        for k in range(len(ds_test))
    ]
    return float(np.mean(dists)), float(np.std(dists))


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 and split into k near-equal test folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def crossval_report(
    ds: PatchDataset,
    k: int = 4,
    seed: int = 0,
    erosion_radius: int = 1,
    predictor_factory: Callable[[PatchModel], RefinedPredictor] | None = None,
) -> list[tuple[float, float]]:
    """k-fold cross-validation: refit the model on each training split and
    evaluate on the held-out quarter.  Returns one (mean_mm, std_mm) per
    fold."""
    if predictor_factory is None:
        predictor_factory = lambda m: RefinedPredictor(model=m, mode="D")
    results = []
    all_idx = np.arange(len(ds))
    for test_idx in fold_indices(len(ds), k, seed):
        train_idx = np.setdiff1d(all_idx, test_idx)
        model = fit_patch_model(ds.subset(train_idx), erosion_radius=erosion_radius)
        results.append(evaluate(ds.subset(test_idx), predictor_factory(model)))
    return results


def save_dataset(directory: str | Path, ds: PatchDataset, extra_meta: dict | None = None) -> None:
    """Persist a dataset as priors.dimg + posteriors.dimg + manifest.json.

    The manifest records the camera, the rect, and the per-pair distances
    between prior and posterior (d_unit and mm), which double as reference
    values for external consumers of the DIMG files.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_dimg(d / "priors.dimg", ds.priors)
    write_dimg(d / "posteriors.dimg", ds.posteriors)
    reports = [
        patch_distance(ds.priors[k], ds.posteriors[k], ds.intrinsics)
        for k in range(len(ds))
    ]
    manifest = {
        "kind": "dataset",
        "action": ds.action_name,
        "pairs": len(ds),
        "intrinsics": ds.intrinsics.to_dict(),
        "rect": {
            "u_min": ds.rect.u_min,
            "v_min": ds.rect.v_min,
            "u_max": ds.rect.u_max,
            "v_max": ds.rect.v_max,
        },
        "files": {"priors": "priors.dimg", "posteriors": "posteriors.dimg"},
        "pair_d_unit": [r.d_unit for r in reports],
        "pair_d_mm": [r.d_mm for r in reports],
        "r_bar": build_weight_field(ds.intrinsics).r_bar,
    }
    if extra_meta:
        manifest.update(extra_meta)
    with open(d / "manifest.json", "w", encoding="ascii") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")


def load_dataset(directory: str | Path) -> PatchDataset:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text("ascii"))
        priors = read_dimg(d / manifest["files"]["priors"])
        posteriors = read_dimg(d / manifest["files"]["posteriors"])
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(f"cannot load dataset from {d}: {e}") from e
    intr = CameraIntrinsics.from_dict(manifest["intrinsics"])
    r = manifest["rect"]
    rect = RoiRect(int(r["u_min"]), int(r["v_min"]), int(r["u_max"]), int(r["v_max"]))
    return PatchDataset(
        action_name=str(manifest["action"]),
        intrinsics=intr,
        rect=rect,
        priors=priors,
        posteriors=posteriors,
    )
