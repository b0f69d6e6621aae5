"""Effect boxes, their image-plane regions of interest, and patch plumbing.

Every shaping action deforms the material only inside an axis-aligned 3D
box centred at the action position.  Projecting that box with a pinhole
camera gives a rectangular region of interest (ROI): the only pixels that
can change when the action runs.  The projection rules pick, per rectangle
edge, the box corner whose image is extremal; which corner that is depends
on the signs of the box's X/Y bounds:

    u_min:  X- >= 0 -> far face (Z+),   X- < 0 -> near face (Z-)
    u_max:  X+ >= 0 -> near face (Z-),  X+ < 0 -> far face (Z+)

and the Y/v analogues.  Results are rounded half away from zero, then
clamped into the frame.

When the box depth is small against the action depth (dz << Z), a thin
approximation drops the Z+/Z- distinction; the resulting ROI width and
height, 2*fx*dx/Z by 2*fy*dy/Z, no longer depend on the position, so all
instances of one action type share a single patch shape.  Widths/heights
are rounded up to even integers to give downstream pooling a stable
contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
import warnings

import numpy as np

from .camera import CameraIntrinsics, NormalizedImage, Point3, round_half_away
from .errors import DomainError, InfeasibleError, PreconditionError, ShapeError

__all__ = [
    "EffectBox",
    "RoiRect",
    "Patch",
    "ActionSpec",
    "project_box",
    "project_box_thin",
    "valid_position_range",
    "position_grid",
    "extract_patch",
    "inject_patch",
    "load_actions",
    "save_actions",
    "bundled_actions",
    "even_ceil",
]

THIN_RATIO_HARD = 0.25
THIN_RATIO_WARN = 0.15


def even_ceil(x: float) -> int:
    """Smallest even integer >= x."""
    n = math.ceil(x - 1e-9)
    return n if n % 2 == 0 else n + 1


@dataclass(frozen=True)
class EffectBox:
    """Axis-aligned box bounding an action's 3D effect.

    center is the action position t; half_extents = (dx, dy, dz) in meters.
    """

    center: Point3
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        if min(self.half_extents) <= 0:
            raise DomainError("half extents must be positive")

    @property
    def x_bounds(self) -> tuple[float, float]:
        return (self.center.X - self.half_extents[0], self.center.X + self.half_extents[0])

    @property
    def y_bounds(self) -> tuple[float, float]:
        return (self.center.Y - self.half_extents[1], self.center.Y + self.half_extents[1])

    @property
    def z_bounds(self) -> tuple[float, float]:
        return (self.center.Z - self.half_extents[2], self.center.Z + self.half_extents[2])

    def corners(self) -> np.ndarray:
        """The 8 box corners as an (8, 3) array."""
        xs = self.x_bounds
        ys = self.y_bounds
        zs = self.z_bounds
        return np.array([(x, y, z) for x in xs for y in ys for z in zs])


@dataclass(frozen=True)
class RoiRect:
    """Rectangle in pixel coordinates: top-left (u_min, v_min), bottom-right
    (u_max, v_max), all 1-based.  width = u_max - u_min and height =
    v_max - v_min; the patch behind the rect spans columns u_min..u_max-1
    and rows v_min..v_max-1, exactly width x height pixels."""

    u_min: int
    v_min: int
    u_max: int
    v_max: int

    def __post_init__(self):
        if not (self.u_min <= self.u_max and self.v_min <= self.v_max):
            raise DomainError("rect corners are not ordered")
        if self.u_min < 1 or self.v_min < 1:
            raise DomainError("rect extends above/left of the image")

    @property
    def width(self) -> int:
        return self.u_max - self.u_min

    @property
    def height(self) -> int:
        return self.v_max - self.v_min

    @property
    def slices(self) -> tuple[slice, slice]:
        """(row, column) slices selecting the patch in a pixel matrix."""
        return (slice(self.v_min - 1, self.v_max - 1), slice(self.u_min - 1, self.u_max - 1))

    def within(self, intr: CameraIntrinsics) -> bool:
        return 1 <= self.u_min <= self.u_max <= intr.width and 1 <= self.v_min <= self.v_max <= intr.height


@dataclass(frozen=True, eq=False)
class Patch:
    """A copied submatrix of a normalized image.  `saturated` counts pixels
    clipped into [0, 1] by the operation that produced the patch."""

    rect: RoiRect
    pixels: np.ndarray
    saturated: int = field(default=0, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.rect.height, self.rect.width):
            raise ShapeError(
                f"patch pixels {px.shape} do not match rect "
                f"{(self.rect.height, self.rect.width)}"
            )
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class ActionSpec:
    """A named action type: box half extents plus its admissible positions.

    roi_px optionally pins the ROI size in pixels; when set it overrides
    the thin-projection formula (annotated sizes beat derived defaults).
    """

    name: str
    dx: float
    dy: float
    dz: float
    positions: np.ndarray  # (n, 3) camera-frame positions, meters
    roi_px: tuple[int, int] | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        if min(self.dx, self.dy, self.dz) <= 0:
            raise DomainError("half extents must be positive")
        if self.roi_px is not None:
            w, h = self.roi_px
            if w < 1 or h < 1:
                raise DomainError("configured ROI size must be positive")
            object.__setattr__(self, "roi_px", (int(w), int(h)))

    @property
    def half_extents(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    def box_at(self, t: Point3) -> EffectBox:
        return EffectBox(center=t, half_extents=self.half_extents)


def _project_edge(f: float, c0: float, coord: float, z_near: float, z_far: float, lo_edge: bool) -> float:
    # Extremal corner choice: for the low edge, a nonnegative coordinate is
    # pulled inward by the far face, a negative one by the near face (and
    # symmetrically for the high edge).
    if lo_edge:
        z = z_far if coord >= 0 else z_near
    else:
        z = z_near if coord >= 0 else z_far
    return f * coord / z + c0


def project_box(intr: CameraIntrinsics, box: EffectBox) -> RoiRect:
    """Exact ROI of an effect box: the pixel rectangle containing the
    projections of all 8 corners, rounded then clamped into the frame."""
    z_near, z_far = box.z_bounds
    if z_near <= 0:
        raise DomainError("box must lie strictly in front of the camera")
    x_lo, x_hi = box.x_bounds
    y_lo, y_hi = box.y_bounds
    u_min = _project_edge(intr.fx, intr.u0, x_lo, z_near, z_far, lo_edge=True)
    u_max = _project_edge(intr.fx, intr.u0, x_hi, z_near, z_far, lo_edge=False)
    v_min = _project_edge(intr.fy, intr.v0, y_lo, z_near, z_far, lo_edge=True)
    v_max = _project_edge(intr.fy, intr.v0, y_hi, z_near, z_far, lo_edge=False)

    def clamp_u(x: float) -> int:
        return int(max(1, min(round_half_away(x), intr.width)))

    def clamp_v(y: float) -> int:
        return int(max(1, min(round_half_away(y), intr.height)))

    return RoiRect(clamp_u(u_min), clamp_v(v_min), clamp_u(u_max), clamp_v(v_max))


def project_box_thin(
    intr: CameraIntrinsics, box: EffectBox, roi_px: tuple[int, int] | None = None
) -> RoiRect:
    """Thin-box ROI: evaluate the projection at the single depth Z.

    Requires dz/Z <= 0.25 (warns above 0.15).  The rect size is
    even_ceil(2*fx*dx/Z) x even_ceil(2*fy*dy/Z), identical for every
    position of the same action type.  A configured (w, h) in roi_px is
    authoritative and replaces the derived size, anchored at the same
    left/top projection.
    """
    t = box.center
    dx, dy, dz = box.half_extents
    if t.Z <= 0:
        raise DomainError("box must lie strictly in front of the camera")
    ratio = dz / t.Z
    if ratio > THIN_RATIO_HARD:
        raise PreconditionError(f"dz/Z = {ratio:.3f} exceeds the thin-box bound {THIN_RATIO_HARD}")
    if ratio > THIN_RATIO_WARN:
        warnings.warn(f"dz/Z = {ratio:.3f} stretches the thin-box approximation", stacklevel=2)
    if roi_px is not None:
        w, h = int(roi_px[0]), int(roi_px[1])
    else:
        w = even_ceil(2.0 * intr.fx * dx / t.Z)
        h = even_ceil(2.0 * intr.fy * dy / t.Z)
    u_lo = int(round_half_away(intr.fx * (t.X - dx) / t.Z + intr.u0))
    v_lo = int(round_half_away(intr.fy * (t.Y - dy) / t.Z + intr.v0))
    rect = RoiRect(u_lo, v_lo, u_lo + w, v_lo + h)
    if not rect.within(intr):
        raise PreconditionError("thin ROI falls outside the frame; move the position inward")
    return rect


def valid_position_range(
    intr: CameraIntrinsics, half_extents: tuple[float, float, float], z: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Position bounds guaranteeing the whole box projects in-frame.

    Any position with X in the first interval and Y in the second keeps
    all 8 corner projections inside [1,w] x [1,h], so project_box never
    clamps.  Both interval ends come from the near face: a corner with a
    negative coordinate projects furthest outward at the smallest depth,
    exactly like a positive one, so the near depth binds on both sides.
    Raises InfeasibleError when the box is too large to fit at depth z.
    """
    dx, dy, dz = half_extents
    if min(dx, dy, dz) <= 0:
        raise DomainError("half extents must be positive")
    z_near = z - dz
    if z_near <= 0:
        raise DomainError("box must lie strictly in front of the camera")
    x_lo = (1 - intr.u0) * z_near / intr.fx + dx
    x_hi = (intr.width - intr.u0) * z_near / intr.fx - dx
    y_lo = (1 - intr.v0) * z_near / intr.fy + dy
    y_hi = (intr.height - intr.v0) * z_near / intr.fy - dy
    if x_lo > x_hi or y_lo > y_hi:
        raise InfeasibleError("box too large to stay in frame at this depth")
    return ((x_lo, x_hi), (y_lo, y_hi))


def position_grid(
    intr: CameraIntrinsics,
    half_extents: tuple[float, float, float],
    z: float,
    n: int,
    workspace: tuple[float, float] | None = None,
    margin_px: float = 4.0,
    cols: int | None = None,
) -> np.ndarray:
    """Deterministic grid of n valid positions at depth z, mm-aligned.

    Positions satisfy the in-frame bound shrunk by margin_px (absorbing
    rounding slack) and, when a centred (x_size, y_size) workspace is
    given, also keep the box inside the workspace.  The grid is row-major
    with `cols` columns (default: ceil(sqrt(n)) widened to the X span).
    """
    (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, half_extents, z)
    mx = margin_px * z / intr.fx
    my = margin_px * z / intr.fy
    x_lo, x_hi = x_lo + mx, x_hi - mx
    y_lo, y_hi = y_lo + my, y_hi - my
    if workspace is not None:
        wx, wy = workspace
        x_lo = max(x_lo, -(wx / 2) + half_extents[0])
        x_hi = min(x_hi, (wx / 2) - half_extents[0])
        y_lo = max(y_lo, -(wy / 2) + half_extents[1])
        y_hi = min(y_hi, (wy / 2) - half_extents[1])
    if x_lo > x_hi or y_lo > y_hi:
        raise InfeasibleError("no admissible positions under these constraints")
    if cols is None:
        cols = max(1, math.ceil(math.sqrt(n * 5.0 / 3.0)))
    rows = math.ceil(n / cols)
    xs = np.linspace(x_lo, x_hi, cols) if cols > 1 else np.array([(x_lo + x_hi) / 2])
    ys = np.linspace(y_lo, y_hi, rows) if rows > 1 else np.array([(y_lo + y_hi) / 2])
    pts = [(x, y, z) for y in ys for x in xs]
    grid = np.asarray(pts[:n], dtype=np.float64)
    return np.round(grid * 1000.0) / 1000.0


def extract_patch(img: NormalizedImage, rect: RoiRect) -> Patch:
    """Copy the rect's submatrix out of a normalized image."""
    if not rect.within(img.intrinsics):
        raise ShapeError("rect does not fit inside the image")
    return Patch(rect=rect, pixels=img.pixels[rect.slices].copy())


def inject_patch(img: NormalizedImage, patch: Patch) -> NormalizedImage:
    """Return a new image with the patch written over its rect.

    Pixels outside the rect are copied bit-exactly; patch values are
    clamped into [0, 1] and the clip count is reported on the result's
    `saturated` field.
    """
    if not patch.rect.within(img.intrinsics):
        raise ShapeError("patch rect does not fit inside the image")
    clipped = np.clip(patch.pixels, 0.0, 1.0)
    saturated = int(np.count_nonzero(clipped != patch.pixels))
    pixels = img.pixels.copy()
    pixels[patch.rect.slices] = clipped
    return NormalizedImage(img.intrinsics, pixels, saturated=saturated)


def _specs_from_obj(obj) -> list[ActionSpec]:
    if not isinstance(obj, list):
        raise DomainError("action file must hold a list of action objects")
    specs = []
    for entry in obj:
        roi = entry.get("roi_px")
        specs.append(
            ActionSpec(
                name=str(entry["name"]),
                dx=float(entry["dx_mm"]) / 1000.0,
                dy=float(entry["dy_mm"]) / 1000.0,
                dz=float(entry["dz_mm"]) / 1000.0,
                positions=np.asarray(entry["positions"], dtype=np.float64).reshape(-1, 3) / 1000.0,
                roi_px=None if roi is None else (int(roi[0]), int(roi[1])),
            )
        )
    return specs


def load_actions(path: str | Path) -> list[ActionSpec]:
    """Load an action set from JSON (sizes and positions in millimeters)."""
    with open(path, "r", encoding="ascii") as f:
        return _specs_from_obj(json.load(f))


def save_actions(path: str | Path, specs: list[ActionSpec]) -> None:
    obj = []
    for s in specs:
        entry = {
            "name": s.name,
            "dx_mm": s.dx * 1000.0,
            "dy_mm": s.dy * 1000.0,
            "dz_mm": s.dz * 1000.0,
            "positions": (s.positions * 1000.0).tolist(),
        }
        if s.roi_px is not None:
            entry["roi_px"] = list(s.roi_px)
        obj.append(entry)
    with open(path, "w", encoding="ascii") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def bundled_actions() -> list[ActionSpec]:
    """The packaged five-action set (grasp, knock, press, pinch, poke)."""
    text = resources.files("moldkit.data").joinpath("actions_paper.json").read_text("ascii")
    return _specs_from_obj(json.loads(text))
