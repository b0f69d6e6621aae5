"""Synthetic stand-in for the robot, the camera mount, and the material.

A heightmap over a workspace rectangle plays the material surface.  Each
action stamps the map with a plastic compaction rule: per cell, the
surface drops to min(height, first-contact height - profile depth), so
virgin material takes the full imprint, already-compacted material
resists, and repeating an action changes nothing.  A fraction of the
displaced volume reappears as a smooth ridge band just outside the
depression, and optional zero-mean Gaussian noise perturbs the touched
cells.  Cells outside the footprint never change, which keeps every
action's effect strictly inside its declared effect box.

Rendering is top-down through the pinhole model: supersampled surface
points project to their pixels and each pixel reads the mean depth of the
samples it receives (a depth camera's in-pixel averaging).  Pixels no
sample reaches show the ground plane at camera height.  Since luminance
encodes the Z coordinate rather than ray length, a flat surface renders
to a constant image regardless of ray obliquity.

Geometry defaults mirror the physical setup the toolkit targets: a box of
500 x 400 mm of material observed from 0.5 m, action positions at
Z = 0.45 m, 1 mm grid cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .camera import (
    CameraIntrinsics,
    D435_CALIBRATED,
    DepthImage,
    NormalizedImage,
    Point3,
    build_weight_field,
    depth_to_luminance,
    normalize_image,
    round_half_away,
)
from .errors import ConfigError, DomainError
from .metric import patch_distance
from .pgm import read_pgm, write_pgm
from .planner import ActionInstance, build_instances
from .predict import PatchDataset
from .roi import (
    ActionSpec,
    RoiRect,
    bundled_actions,
    position_grid,
    project_box_thin,
    save_actions,
)
from .roi import load_actions as _load_actions

__all__ = [
    "Heightmap",
    "StampProfile",
    "Simulator",
    "Scenario",
    "DEPTH_MM",
    "NOISE_SIGMA_MM",
    "SCENARIOS",
    "make_stamp",
    "make_surface",
    "apply_action",
    "render",
    "render_rect",
    "gen_dataset",
    "gen_scenario",
    "build_scenario",
    "save_scenario",
    "load_scenario",
]

ACTION_Z = 0.45
CAMERA_HEIGHT = 0.5
WORKSPACE = (0.5, 0.4)  # meters along X (image columns) and Y (rows)
GRID_RES = 0.001

# Stamp depression depths, on the scale a hand working soft material
# leaves.  Keeping imprints shallow against the viewing distance also
# keeps their image rendering position invariant (deep pits would shift
# visibly with perspective at off-axis positions).
DEPTH_MM = {"grasp": 16.0, "knock": 14.0, "press": 12.0, "pinch": 10.0, "poke": 7.0}

# Per-action execution noise; repeatability worsens with the number of
# moving fingers involved, from poke (one finger) through fist actions to
# grasp (the whole hand).  Calibrated so the holdout prediction error of
# the trained models reproduces that ordering.
NOISE_SIGMA_MM = {"poke": 0.3, "pinch": 0.9, "press": 1.0, "knock": 1.4, "grasp": 3.0}

RIDGE_FRACTION = 0.3
_CORE_SCALE = 0.62
_RIM_SCALE = 0.88


@dataclass(frozen=True, eq=False)
class Heightmap:
    """Surface heights (meters) over a workspace rectangle.

    heights[i, j] is the surface at cell center (x0 + (j+0.5)*res,
    y0 + (i+0.5)*res) in camera-frame X/Y.  Heights must stay within
    [0, height_cap].  compaction[i, j] tracks how deep each cell has
    already been pressed: compacted material resists further pressing, so
    a tool only removes the part of its profile exceeding the cell's
    compaction.  Snapshots are immutable.
    """

    heights: np.ndarray
    res: float
    origin: tuple[float, float]
    height_cap: float = 0.4
    compaction: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.float64)
        if not np.isfinite(h).all():
            raise DomainError("heightmap contains non-finite values")
        if h.size and (h.min() < 0.0 or h.max() > self.height_cap):
            raise DomainError("heights must lie within [0, height_cap]")
        h = h.copy()
        h.flags.writeable = False
        object.__setattr__(self, "heights", h)
        c = self.compaction
        c = np.zeros_like(h) if c is None else np.asarray(c, dtype=np.float64).copy()
        if c.shape != h.shape:
            raise DomainError("compaction grid must match the height grid")
        c.flags.writeable = False
        object.__setattr__(self, "compaction", c)

    @property
    def extent(self) -> tuple[float, float]:
        ny, nx = self.heights.shape
        return (nx * self.res, ny * self.res)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        j = int(np.floor((x - self.origin[0]) / self.res))
        i = int(np.floor((y - self.origin[1]) / self.res))
        return i, j


@dataclass(frozen=True, eq=False)
class StampProfile:
    """Parametric tool imprint on the heightmap grid.

    depths holds the depression below the contact level per cell (>= 0,
    max <= the action's dz); core is the pressed support, ring the band
    that receives the displaced-volume ridge.  ridge_fraction is the share
    of displaced volume re-deposited on the ring; ring_weights (mean 1
    over the ring) shape the deposit so it rises and falls smoothly
    instead of forming a sharp-walled wall.
    """

    action_name: str
    depths: np.ndarray
    core: np.ndarray
    ring: np.ndarray
    ridge_fraction: float
    ring_weights: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.ridge_fraction < 1.0:
            raise DomainError("ridge fraction must lie in [0, 1)")
        if (np.asarray(self.depths) < 0).any():
            raise DomainError("stamp depths must be nonnegative")


def make_stamp(
    spec: ActionSpec,
    res: float = GRID_RES,
    depth: float | None = None,
    ridge_fraction: float = RIDGE_FRACTION,
) -> StampProfile:
    """Build the imprint of one action type on a grid of the given pitch.

    The depression is a plateau with a wide cosine rim inside a
    superellipse of semi-axes 0.62 * (dx, dy); the ridge band extends to
    0.88 * (dx, dy) with a smooth bump cross-section.  Gentle walls keep
    the rendered imprint stable against sub-pixel placement, and the outer
    rim stays inside the effect box with margin for interpolation and
    pixel rounding when validating locality.
    """
    if depth is None:
        depth = DEPTH_MM.get(spec.name, 12.0) / 1000.0
    if depth > spec.dz:
        raise DomainError(f"stamp depth {depth} exceeds the box half-depth {spec.dz}")
    ax, ay = _CORE_SCALE * spec.dx, _CORE_SCALE * spec.dy
    bx, by = _RIM_SCALE * spec.dx, _RIM_SCALE * spec.dy
    half_x = int(np.floor(bx / res))
    half_y = int(np.floor(by / res))
    xs = (np.arange(-half_x, half_x + 1)) * res
    ys = (np.arange(-half_y, half_y + 1)) * res
    X, Y = np.meshgrid(xs, ys)
    rho_core = ((np.abs(X) / ax) ** 4 + (np.abs(Y) / ay) ** 4) ** 0.25
    rho_rim = ((np.abs(X) / bx) ** 4 + (np.abs(Y) / by) ** 4) ** 0.25
    core = rho_core < 1.0
    ring = (~core) & (rho_rim <= 1.0)
    taper = np.clip((rho_core - 0.45) / 0.55, 0.0, 1.0)
    depths = np.where(core, depth * 0.5 * (1.0 + np.cos(np.pi * taper)), 0.0)
    # Ridge bump: zero at both band edges, peaked in the middle.
    band = np.clip((rho_rim - _CORE_SCALE / _RIM_SCALE) / (1.0 - _CORE_SCALE / _RIM_SCALE), 0.0, 1.0)
    weights = np.where(ring, np.sin(np.pi * band) ** 2, 0.0)
    total = weights[ring].sum()
    if total > 0:
        weights = weights * (ring.sum() / total)
    return StampProfile(spec.name, depths, core, ring, ridge_fraction, weights)


def make_surface(
    kind: str,
    workspace: tuple[float, float] = WORKSPACE,
    res: float = GRID_RES,
    rng: np.random.Generator | None = None,
    base: float = 0.05,
    irregular_std: float = 0.017,
    smooth_mm: float = 60.0,
    curvature_radius: float = 0.15,
    cap_height: float = 0.035,
) -> Heightmap:
    """Initial material surfaces: flat, sloped, irregular, or curved.

    irregular surfaces are smoothed Gaussian fields rescaled to the given
    height standard deviation; curved is a spherical cap of the given
    curvature radius, truncated at cap_height.
    """
    nx = int(round(workspace[0] / res))
    ny = int(round(workspace[1] / res))
    origin = (-workspace[0] / 2, -workspace[1] / 2)
    if kind == "flat":
        h = np.full((ny, nx), base)
    elif kind == "sloped":
        rng = rng or np.random.default_rng(0)
        gx, gy = rng.uniform(-0.02, 0.02, size=2)
        xs = origin[0] + (np.arange(nx) + 0.5) * res
        ys = origin[1] + (np.arange(ny) + 0.5) * res
        h = base + gx * xs[None, :] + gy * ys[:, None]
    elif kind == "irregular":
        rng = rng or np.random.default_rng(0)
        field_ = ndimage.gaussian_filter(rng.normal(size=(ny, nx)), sigma=smooth_mm * 0.001 / res)
        std = field_.std()
        if std > 0:
            field_ = field_ * (irregular_std / std)
        h = base + field_
    elif kind == "curved":
        xs = origin[0] + (np.arange(nx) + 0.5) * res
        ys = origin[1] + (np.arange(ny) + 0.5) * res
        r2 = xs[None, :] ** 2 + ys[:, None] ** 2
        dome = np.sqrt(np.clip(curvature_radius**2 - r2, 0.0, None)) - (curvature_radius - cap_height)
        h = base + np.clip(dome, 0.0, None)
    else:
        raise ConfigError(f"unknown surface kind {kind!r}")
    return Heightmap(np.clip(h, 0.002, None), res=res, origin=origin)


def apply_action(
    hm: Heightmap,
    stamp: StampProfile,
    center: tuple[float, float],
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Heightmap:
    """Stamp the heightmap: press, ridge, perturb.

    Per cell the surface drops to min(height, contact_height - depth),
    where contact_height is the surface the tool first met there: virgin
    material yields the full profile depth, material already compacted to
    depth c only yields max(0, depth - c).  This makes the imprint
    independent of where and how high the local surface sits (one action
    type leaves one shape) and a repeated application exactly idempotent,
    while still removing any loose material deposited on the crater since.
    The displaced volume times ridge_fraction is deposited uniformly on
    the ring just outside the depression; optional Gaussian noise perturbs
    the touched cells.  The footprint must lie inside the workspace.
    """
    ci, cj = hm.cell_of(*center)
    sy, sx = stamp.depths.shape
    i0, j0 = ci - sy // 2, cj - sx // 2
    ny, nx = hm.heights.shape
    if i0 < 0 or j0 < 0 or i0 + sy > ny or j0 + sx > nx:
        raise DomainError("stamp footprint falls outside the workspace")
    heights = hm.heights.copy()
    compaction = hm.compaction.copy()
    window = heights[i0 : i0 + sy, j0 : j0 + sx]
    cwin = compaction[i0 : i0 + sy, j0 : j0 + sx]

    cut = np.where(stamp.core, np.maximum(stamp.depths - cwin, 0.0), 0.0)
    pressed = window - cut
    cwin[:, :] = np.maximum(cwin, np.where(stamp.core, stamp.depths, 0.0))
    displaced = float(cut.sum()) * hm.res**2
    ring_cells = int(stamp.ring.sum())
    if ring_cells and displaced > 0.0:
        ridge_height = stamp.ridge_fraction * displaced / (ring_cells * hm.res**2)
        pressed = pressed + stamp.ring_weights * ridge_height
    if noise_sigma > 0.0:
        if rng is None:
            raise DomainError("noise requires an explicit random generator")
        touched = stamp.core | stamp.ring
        noise = np.zeros_like(pressed)
        noise[touched] = rng.normal(0.0, noise_sigma, size=int(touched.sum()))
        pressed = pressed + noise
    window[:, :] = np.clip(pressed, 0.0, hm.height_cap)
    return replace(hm, heights=heights, compaction=compaction)


def _splat(
    hm: Heightmap,
    intr: CameraIntrinsics,
    camera_height: float,
    supersample: int,
    window: tuple[slice, slice] | None = None,
):
    """Project supersampled surface points; return pixel indices + depths."""
    heights = hm.heights if window is None else hm.heights[window]
    i_off = 0 if window is None else window[0].start
    j_off = 0 if window is None else window[1].start
    ny, nx = heights.shape
    step = 1.0 / supersample
    # Sample coordinates in cell units of the full map.
    jj = j_off + np.arange(-0.5 + step / 2, nx - 0.5, step)
    ii = i_off + np.arange(-0.5 + step / 2, ny - 0.5, step)
    hs = ndimage.map_coordinates(
        hm.heights, np.meshgrid(ii, jj, indexing="ij"), order=1, mode="nearest"
    )
    X = hm.origin[0] + (jj + 0.5) * hm.res
    Y = hm.origin[1] + (ii + 0.5) * hm.res
    Z = camera_height - hs
    U = intr.fx * (X[None, :] / Z) + intr.u0
    V = intr.fy * (Y[:, None] / Z) + intr.v0
    u = np.floor(U + 0.5).astype(np.int64)
    v = np.floor(V + 0.5).astype(np.int64)
    return u, v, Z


def _mean_scatter(size: int, flat_idx: np.ndarray, depths: np.ndarray, background: float) -> np.ndarray:
    total = np.zeros(size)
    count = np.zeros(size)
    np.add.at(total, flat_idx, depths)
    np.add.at(count, flat_idx, 1.0)
    hit = count > 0
    out = np.full(size, background)
    out[hit] = total[hit] / count[hit]
    return out


def render(
    hm: Heightmap,
    intr: CameraIntrinsics,
    camera_height: float = CAMERA_HEIGHT,
    supersample: int = 3,
) -> DepthImage:
    """Render the heightmap to a depth image, fronto-parallel top-down.

    Every supersampled surface point projects to its pixel; a pixel's
    depth is the mean of the samples it receives (mimicking a depth
    camera's in-pixel averaging, and far more stable against sub-cell
    placement than nearest-sample selection).  Pixels no surface sample
    reaches show the ground plane.  Deterministic for a fixed heightmap.
    """
    if camera_height > intr.z_max or camera_height - hm.heights.max() < intr.z_min:
        raise ConfigError("workspace depths leave the camera range")
    u, v, Z = _splat(hm, intr, camera_height, supersample)
    inside = (u >= 1) & (u <= intr.width) & (v >= 1) & (v <= intr.height)
    flat = (v - 1) * intr.width + (u - 1)
    buf = _mean_scatter(
        intr.height * intr.width,
        flat[inside],
        np.broadcast_to(Z, flat.shape)[inside],
        camera_height,
    )
    l, _ = depth_to_luminance(intr, buf.reshape(intr.height, intr.width))
    return DepthImage(intr, l.astype(np.uint16))


def render_rect(
    hm: Heightmap,
    intr: CameraIntrinsics,
    rect,
    camera_height: float = CAMERA_HEIGHT,
    supersample: int = 3,
) -> np.ndarray:
    """Luminances of the pixels behind a RoiRect only.

    Restricts the splat to the heightmap window that can project into the
    rect; pixels the surface never reaches show the ground plane.  Equals
    the corresponding crop of render() for rects away from pathological
    occluders.
    """
    z_lo = camera_height - hm.heights.max()
    xs, ys = [], []
    for upix in (rect.u_min - 1, rect.u_max + 1):
        for z in (z_lo, camera_height):
            xs.append((upix - intr.u0) / intr.fx * z)
    for vpix in (rect.v_min - 1, rect.v_max + 1):
        for z in (z_lo, camera_height):
            ys.append((vpix - intr.v0) / intr.fy * z)
    ny, nx = hm.heights.shape
    j_lo = max(0, int(np.floor((min(xs) - hm.origin[0]) / hm.res)) - 2)
    j_hi = min(nx, int(np.ceil((max(xs) - hm.origin[0]) / hm.res)) + 2)
    i_lo = max(0, int(np.floor((min(ys) - hm.origin[1]) / hm.res)) - 2)
    i_hi = min(ny, int(np.ceil((max(ys) - hm.origin[1]) / hm.res)) + 2)
    h, w = rect.height, rect.width
    buf = np.full(h * w, camera_height)
    if i_lo < i_hi and j_lo < j_hi:
        u, v, Z = _splat(hm, intr, camera_height, supersample, (slice(i_lo, i_hi), slice(j_lo, j_hi)))
        uu = u - rect.u_min
        vv = v - rect.v_min
        inside = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        flat = vv * w + uu
        buf = _mean_scatter(h * w, flat[inside], np.broadcast_to(Z, flat.shape)[inside], camera_height)
    l, _ = depth_to_luminance(intr, buf.reshape(h, w))
    return l


class Simulator:
    """Stateful wrapper: one material surface, one camera, one action set.

    The surface evolves as actions are applied; every snapshot is an
    immutable Heightmap.  Execution noise draws from the generator passed
    at construction, so runs are reproducible from their seed.
    """

    def __init__(
        self,
        specs: list[ActionSpec],
        intr: CameraIntrinsics = D435_CALIBRATED,
        surface: str = "flat",
        seed: int = 0,
        workspace: tuple[float, float] = WORKSPACE,
        res: float = GRID_RES,
        camera_height: float = CAMERA_HEIGHT,
        noise_mm: dict | None = None,
        irregular_std: float = 0.017,
        ridge_fraction: float = RIDGE_FRACTION,
    ):
        self.specs = {s.name: s for s in specs}
        self.intr = intr
        self.camera_height = camera_height
        self.workspace = workspace
        self.noise_mm = dict(NOISE_SIGMA_MM if noise_mm is None else noise_mm)
        seq = np.random.SeedSequence(seed)
        surf_seed, self._noise_seq = seq.spawn(2)
        self.heightmap = make_surface(
            surface,
            workspace=workspace,
            res=res,
            rng=np.random.default_rng(surf_seed),
            irregular_std=irregular_std,
        )
        self._rng = np.random.default_rng(self._noise_seq)
        self.stamps = {s.name: make_stamp(s, res, ridge_fraction=ridge_fraction) for s in specs}
        self.wf = build_weight_field(intr)

    def instances(self) -> list[ActionInstance]:
        return build_instances(self.intr, list(self.specs.values()))

    def apply(self, inst: ActionInstance, noise: bool = True) -> None:
        sigma = self.noise_mm.get(inst.action_name, 0.5) / 1000.0 if noise else 0.0
        self.heightmap = apply_action(
            self.heightmap,
            self.stamps[inst.action_name],
            (inst.t.X, inst.t.Y),
            noise_sigma=sigma,
            rng=self._rng,
        )

    def render(self) -> DepthImage:
        return render(self.heightmap, self.intr, self.camera_height)

    def normalized(self) -> NormalizedImage:
        return normalize_image(self.render(), self.wf)


def gen_dataset(
    spec: ActionSpec,
    n_pairs: int,
    noise_sigma: float | None = None,
    seed: int = 0,
    intr: CameraIntrinsics = D435_CALIBRATED,
    surface: str = "mixed",
    workspace: tuple[float, float] = WORKSPACE,
    res: float = GRID_RES,
    camera_height: float = CAMERA_HEIGHT,
    irregular_std: float = 0.006,
    z: float = ACTION_Z,
) -> PatchDataset:
    """Prior/posterior patch pairs for one action type.

    Each pair draws a fresh surface (cycling flat, sloped, irregular when
    surface="mixed"), a random mm-aligned valid position, applies the
    action with execution noise, and extracts both patches at the
    thin-projection rect of that position.  Fully reproducible from seed.
    """
    if n_pairs <= 0:
        raise DomainError("n_pairs must be positive")
    if noise_sigma is None:
        noise_sigma = NOISE_SIGMA_MM.get(spec.name, 0.5) / 1000.0
    wf = build_weight_field(intr)
    stamp = make_stamp(spec, res)
    kinds = [surface] if surface != "mixed" else ["flat", "sloped", "irregular"]
    grid_lo, grid_hi = _position_bounds(intr, spec, z, workspace)
    priors, posteriors = [], []
    rect0 = None
    children = np.random.SeedSequence(seed).spawn(n_pairs)
    for k in range(n_pairs):
        rng = np.random.default_rng(children[k])
        kind = kinds[k % len(kinds)]
        base = 0.05 if kind == "flat" else float(rng.uniform(0.045, 0.055))
        hm = make_surface(
            kind, workspace=workspace, res=res, rng=rng, base=base, irregular_std=irregular_std
        )
        t = Point3(
            float(np.round(rng.uniform(grid_lo[0], grid_hi[0]), 3)),
            float(np.round(rng.uniform(grid_lo[1], grid_hi[1]), 3)),
            z,
        )
        # Anchor the patch where the effect is actually visible: at the
        # local surface depth rather than the nominal action depth (the
        # moral equivalent of drawing the box around the imprint).  The
        # patch shape stays the action's nominal one.
        nominal = project_box_thin(intr, spec.box_at(t), roi_px=spec.roi_px)
        ci, cj = hm.cell_of(t.X, t.Y)
        z_local = camera_height - float(hm.heights[ci, cj])
        u_lo = int(round_half_away(intr.fx * (t.X - spec.dx) / z_local + intr.u0))
        v_lo = int(round_half_away(intr.fy * (t.Y - spec.dy) / z_local + intr.v0))
        rect = RoiRect(u_lo, v_lo, u_lo + nominal.width, v_lo + nominal.height)
        if rect0 is None:
            rect0 = rect
        weights = wf.values[rect.slices]
        prior_l = render_rect(hm, intr, rect, camera_height)
        hm2 = apply_action(hm, stamp, (t.X, t.Y), noise_sigma=noise_sigma, rng=rng)
        post_l = render_rect(hm2, intr, rect, camera_height)
        priors.append(weights * prior_l)
        posteriors.append(weights * post_l)
    return PatchDataset(spec.name, intr, rect0, np.stack(priors), np.stack(posteriors))


def _position_bounds(intr, spec, z, workspace, margin_px: float = 4.0):
    from .roi import valid_position_range

    (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, spec.half_extents, z)
    mx, my = margin_px * z / intr.fx, margin_px * z / intr.fy
    x_lo, x_hi = x_lo + mx, x_hi - mx
    y_lo, y_hi = y_lo + my, y_hi - my
    if workspace is not None:
        x_lo = max(x_lo, -(workspace[0] / 2) + spec.dx)
        x_hi = min(x_hi, (workspace[0] / 2) - spec.dx)
        y_lo = max(y_lo, -(workspace[1] / 2) + spec.dy)
        y_hi = min(y_hi, (workspace[1] / 2) - spec.dy)
    if x_lo > x_hi or y_lo > y_hi:
        raise DomainError(f"action {spec.name!r} does not fit the workspace")
    return (x_lo, y_lo), (x_hi, y_hi)


@dataclass
class Scenario:
    """A planning problem: initial and goal images plus the ground truth
    that generated the goal."""

    intrinsics: CameraIntrinsics
    specs: list[ActionSpec]
    planted: list[tuple[str, int]]
    surface: str
    seed: int
    workspace: tuple[float, float]
    camera_height: float
    i0: NormalizedImage
    i_star: NormalizedImage
    initial: DepthImage
    goal: DepthImage
    name: str | None = None
    irregular_std: float = 0.017

    def simulator(self, replay_seed: int | None = None) -> Simulator:
        """A fresh simulator at the scenario's initial surface.

        The surface is reproduced exactly (same seed); execution noise
        differs per replay_seed so a replay behaves like a new run.
        """
        sim = Simulator(
            self.specs,
            intr=self.intrinsics,
            surface=self.surface,
            seed=self.seed,
            workspace=self.workspace,
            camera_height=self.camera_height,
            irregular_std=self.irregular_std,
        )
        if replay_seed is not None:
            sim._rng = np.random.default_rng(np.random.SeedSequence(replay_seed))
        return sim

    def planted_instances(self) -> list[ActionInstance]:
        by_name = {}
        for inst in build_instances(self.intrinsics, self.specs):
            by_name.setdefault(inst.action_name, []).append(inst)
        return [by_name[name][j] for name, j in self.planted]


def gen_scenario(
    specs: list[ActionSpec],
    planted: list[tuple[str, int]],
    surface: str = "flat",
    seed: int = 0,
    intr: CameraIntrinsics = D435_CALIBRATED,
    workspace: tuple[float, float] = WORKSPACE,
    camera_height: float = CAMERA_HEIGHT,
    irregular_std: float = 0.017,
    name: str | None = None,
) -> Scenario:
    """Shape a goal by applying the planted (action, position) list to the
    initial surface; keep everything needed to score a planner against it."""
    scn = Scenario(
        intrinsics=intr,
        specs=specs,
        planted=list(planted),
        surface=surface,
        seed=seed,
        workspace=workspace,
        camera_height=camera_height,
        i0=None,  # filled below
        i_star=None,
        initial=None,
        goal=None,
        name=name,
        irregular_std=irregular_std,
    )
    sim = scn.simulator()
    initial = sim.render()
    scn.initial = initial
    scn.i0 = normalize_image(initial, sim.wf)
    for inst in scn.planted_instances():
        sim.apply(inst)
    goal = sim.render()
    scn.goal = goal
    scn.i_star = normalize_image(goal, sim.wf)
    return scn


def _wide_grids(intr, names, n, workspace, z=ACTION_Z):
    specs = {s.name: s for s in bundled_actions()}
    out = []
    for name in names:
        base = specs[name]
        grid = position_grid(intr, base.half_extents, z, n, workspace=workspace)
        out.append(ActionSpec(base.name, base.dx, base.dy, base.dz, grid))
    return out


# Named scenarios.  Position indices are row-major into each action's grid
# (0-based); the layouts below were chosen so that "non-overlapping"
# plants keep their stamp footprints disjoint.
SCENARIOS = {
    "single_poke": dict(
        names=("grasp", "knock", "poke"), n=15, workspace=WORKSPACE,
        planted=[("poke", 7)], surface="flat",
    ),
    "three_actions": dict(
        names=("grasp", "knock", "poke"), n=15, workspace=(0.8, 0.44),
        planted=[("grasp", 5), ("knock", 4), ("poke", 10)], surface="flat",
    ),
    "curved": dict(
        names=("grasp", "knock", "press", "pinch", "poke"), n=21, workspace=(0.8, 0.44),
        planted=[("knock", 8), ("press", 10), ("poke", 14)], surface="curved",
    ),
    "irregular": dict(
        names=("grasp", "knock", "press", "pinch", "poke"), n=21, workspace=(0.8, 0.44),
        planted=[("knock", 8), ("pinch", 9), ("poke", 15)], surface="irregular",
    ),
    "overlap": dict(
        names=("grasp", "knock", "press", "pinch", "poke"), n=21, workspace=(0.8, 0.44),
        planted=[("knock", 9), ("poke", 9), ("pinch", 14)], surface="irregular",
    ),
}


def build_scenario(name: str, seed: int = 0, intr: CameraIntrinsics = D435_CALIBRATED) -> Scenario:
    try:
        cfg = SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}"
        ) from None
    if cfg["workspace"] == WORKSPACE:
        specs = [s for s in bundled_actions() if s.name in cfg["names"]]
    else:
        specs = _wide_grids(intr, cfg["names"], cfg["n"], cfg["workspace"])
    return gen_scenario(
        specs,
        cfg["planted"],
        surface=cfg["surface"],
        seed=seed,
        intr=intr,
        workspace=cfg["workspace"],
        name=name,
    )


def save_scenario(directory: str | Path, scn: Scenario) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_pgm(d / "initial.pgm", scn.initial)
    write_pgm(d / "goal.pgm", scn.goal)
    save_actions(d / "actions.json", scn.specs)
    manifest = {
        "kind": "scenario",
        "name": scn.name,
        "seed": scn.seed,
        "surface": scn.surface,
        "workspace_mm": [scn.workspace[0] * 1000.0, scn.workspace[1] * 1000.0],
        "camera_height_mm": scn.camera_height * 1000.0,
        "irregular_std_mm": scn.irregular_std * 1000.0,
        "planted": [{"action": a, "position": j} for a, j in scn.planted],
        "images": {"initial": "initial.pgm", "goal": "goal.pgm"},
        "actions_file": "actions.json",
        "initial_d_mm": patch_distance(scn.i0.pixels, scn.i_star.pixels, scn.intrinsics).d_mm,
    }
    with open(d / "manifest.json", "w", encoding="ascii") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")


def load_scenario(directory: str | Path) -> Scenario:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text("ascii"))
        initial = read_pgm(d / manifest["images"]["initial"])
        goal = read_pgm(d / manifest["images"]["goal"])
        specs = _load_actions(d / manifest["actions_file"])
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(f"cannot load scenario from {d}: {e}") from e
    wf = build_weight_field(initial.intrinsics)
    return Scenario(
        intrinsics=initial.intrinsics,
        specs=specs,
        planted=[(p["action"], int(p["position"])) for p in manifest["planted"]],
        surface=str(manifest["surface"]),
        seed=int(manifest["seed"]),
        workspace=(manifest["workspace_mm"][0] / 1000.0, manifest["workspace_mm"][1] / 1000.0),
        camera_height=manifest["camera_height_mm"] / 1000.0,
        i0=normalize_image(initial, wf),
        i_star=normalize_image(goal, wf),
        initial=initial,
        goal=goal,
        name=manifest.get("name"),
        irregular_std=manifest.get("irregular_std_mm", 17.0) / 1000.0,
    )
