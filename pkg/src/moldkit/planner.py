"""Greedy forward search over the tree of predicted posterior images.

Starting from the current image, every admissible action instance is
simulated in place: extract its ROI patch, predict the patch after the
action, inject it back, and measure the distance to the goal image.  The
best strictly improving action is appended and the loop repeats until no
action improves (or a step cap / accuracy target is hit).  Injection makes
each chosen prediction part of the next state, so actions whose regions
overlap compose naturally across iterations.

Candidate distances are computed incrementally: a candidate differs from
the current image only inside its rect, so only the rect's contribution to
the absolute-difference sum changes.  The trace recorded in the returned
plan is recomputed on full images after each accepted step.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraIntrinsics, NormalizedImage, Point3, build_weight_field
from .errors import MoldkitError, ShapeError
from .metric import distance
from .predict import PredictorBank
from .roi import ActionSpec, Patch, RoiRect, extract_patch, inject_patch, project_box_thin

__all__ = [
    "ActionInstance",
    "Candidate",
    "Plan",
    "PlanLimits",
    "ReplayResult",
    "build_instances",
    "expand",
    "plan",
    "replay",
]


@dataclass(frozen=True)
class ActionInstance:
    """One action type at one discrete position, with its precomputed ROI."""

    action_name: str
    type_index: int
    position_index: int
    t: Point3
    rect: RoiRect

    @property
    def key(self) -> tuple[int, int]:
        return (self.type_index, self.position_index)

    def label(self) -> str:
        return f"{self.action_name}@{self.position_index}"


def build_instances(intr: CameraIntrinsics, specs: list[ActionSpec]) -> list[ActionInstance]:
    """All (type, position) instances of an action set, rects included.

    Ordering is by type index then position index and is the tie-breaking
    order used by the planner.
    """
    instances = []
    for i, spec in enumerate(specs):
        for j, pos in enumerate(spec.positions):
            t = Point3(*pos)
            rect = project_box_thin(intr, spec.box_at(t), roi_px=spec.roi_px)
            instances.append(ActionInstance(spec.name, i, j, t, rect))
    return instances


@dataclass(frozen=True)
class PlanLimits:
    """Planner guards: step cap, minimum per-step improvement (meters), and
    an optional accuracy target that stops the search early."""

    k_max: int = 32
    eps_d_m: float = 5e-5  # 0.05 mm
    d_bar_m: float | None = None


@dataclass(frozen=True)
class Candidate:
    """One expanded action: its predicted patch and resulting distance."""

    instance: ActionInstance
    d_meters: float
    patch: Patch

    def apply(self, img: NormalizedImage) -> NormalizedImage:
        """Materialize the candidate's posterior image."""
        return inject_patch(img, self.patch)


@dataclass
class Plan:
    """Greedy search result: the action sequence, the predicted distance
    after every step (trace_m[0] is the initial distance), and the final
    predicted image.  truncated marks plans stopped by the step cap."""

    sequence: list[ActionInstance]
    trace_m: list[float]
    predicted_final: NormalizedImage
    truncated: bool = False

    @property
    def trace_mm(self) -> list[float]:
        return [d * 1000.0 for d in self.trace_m]


@dataclass
class ReplayResult:
    """Execution record of a plan on a simulator."""

    final: NormalizedImage
    trace_m: list[float]
    failure_index: int | None = None

    @property
    def trace_mm(self) -> list[float]:
        return [d * 1000.0 for d in self.trace_m]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MOLDKIT_THREADS", "1")))
    except ValueError:
        return 1


def expand(
    i_k: NormalizedImage,
    i_star: NormalizedImage,
    instances: list[ActionInstance],
    bank: PredictorBank,
) -> list[Candidate]:
    """Evaluate every action instance against the goal.

    Candidates come back ordered by (type index, position index) no matter
    how the evaluation was scheduled; predictions are batched per action
    type.  Set MOLDKIT_THREADS to evaluate types concurrently.
    """
    if i_k.intrinsics != i_star.intrinsics:
        raise ShapeError("current and goal images come from different cameras")
    intr = i_k.intrinsics
    wf = build_weight_field(intr)
    scale = wf.r_bar * intr.depth_span / (intr.width * intr.height)
    s_total = float(np.abs(i_k.pixels - i_star.pixels).sum())

    ordered = sorted(instances, key=lambda a: a.key)
    groups: dict[int, list[ActionInstance]] = {}
    for inst in ordered:
        groups.setdefault(inst.type_index, []).append(inst)

    def eval_group(group: list[ActionInstance]) -> list[Candidate]:
        predictor = bank.predictor(group[0].action_name)
        priors = np.stack([i_k.pixels[inst.rect.slices] for inst in group])
        preds = predictor.predict_batch(priors)
        out = []
        for inst, pred in zip(group, preds):
            goal_patch = i_star.pixels[inst.rect.slices]
            s_old = float(np.abs(i_k.pixels[inst.rect.slices] - goal_patch).sum())
            s_new = float(np.abs(pred - goal_patch).sum())
            d_m = (s_total - s_old + s_new) * scale
            out.append(Candidate(inst, d_m, Patch(inst.rect, pred)))
        return out

    group_list = list(groups.values())
    workers = _workers()
    if workers > 1 and len(group_list) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_group = list(pool.map(eval_group, group_list))
    else:
        per_group = [eval_group(g) for g in group_list]
    return [c for chunk in per_group for c in chunk]


def plan(
    i0: NormalizedImage,
    i_star: NormalizedImage,
    instances: list[ActionInstance],
    bank: PredictorBank,
    limits: PlanLimits = PlanLimits(),
) -> Plan:
    """Greedy action-sequence search from i0 toward i_star.

    Per iteration all candidates are expanded; the argmin joins the
    sequence if it improves the current distance by more than eps_d_m
    (ties break on the lowest (type, position) key).  The returned trace
    is strictly decreasing by construction.
    """
    if i0.intrinsics != i_star.intrinsics:
        raise ShapeError("initial and goal images come from different cameras")
    for inst in instances:
        if not inst.rect.within(i0.intrinsics):
            raise ShapeError(f"instance {inst.label()} has an out-of-frame rect")
    current = i0
    d_k = distance(current, i_star).d_meters
    trace = [d_k]
    sequence: list[ActionInstance] = []
    truncated = False
    while True:
        if limits.d_bar_m is not None and d_k <= limits.d_bar_m:
            break
        if len(sequence) >= limits.k_max:
            truncated = True
            break
        candidates = expand(current, i_star, instances, bank)
        if not candidates:
            break
        best = min(candidates, key=lambda c: (c.d_meters, c.instance.key))
        if best.d_meters >= d_k - limits.eps_d_m:
            break
        nxt = best.apply(current)
        d_next = distance(nxt, i_star).d_meters
        if d_next >= d_k - limits.eps_d_m:
            break
        current = nxt
        d_k = d_next
        sequence.append(best.instance)
        trace.append(d_k)
    return Plan(sequence=sequence, trace_m=trace, predicted_final=current, truncated=truncated)


def replay(p: Plan, sim, i_star: NormalizedImage) -> ReplayResult:
    """Execute a plan's sequence on a simulator, tracking the real distance
    to the goal after every action.  On a simulator failure the trace up to
    the failing step is returned along with its index."""
    trace = [distance(sim.normalized(), i_star).d_meters]
    for k, inst in enumerate(p.sequence):
        try:
            sim.apply(inst)
        except MoldkitError:
            return ReplayResult(final=sim.normalized(), trace_m=trace, failure_index=k)
        trace.append(distance(sim.normalized(), i_star).d_meters)
    return ReplayResult(final=sim.normalized(), trace_m=trace, failure_index=None)
