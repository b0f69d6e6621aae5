"""Pinhole depth-camera model.

A depth image stores, for each pixel (u, v), an integer luminance value that
encodes depth linearly between z_max (luminance 0) and z_min (luminance
2^b - 1).  Together with the pinhole intrinsics this makes the mapping
between pixels and 3D points bijective, which is what the rest of the
toolkit builds on:

    depth      Z(l) = (z_min - z_max) / (2^b - 1) * l + z_max
    position   X = (u - u0) / fx * Z,   Y = (v - v0) / fy * Z

Pixel coordinates are 1-based, u along columns (1..w) and v along rows
(1..h), matching the usual matrix layout where pixels[v-1, u-1] is the
luminance of pixel (u, v).

The module also builds the radial weight field

    R_uv = sqrt(1 + x^2 + y^2),   x = (u - u0)/fx,  y = (v - v0)/fy

whose value is the ratio between the 3D distance of two points seen at the
same pixel and their plain depth difference.  Scaling luminances by
R_uv / ((2^b - 1) * R_bar) yields "normalized" images with entries in
[0, 1] on which the mean absolute difference is a true point-cloud metric
(see moldkit.metric).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError, FrustumError, ShapeError

__all__ = [
    "CameraIntrinsics",
    "DepthImage",
    "NormalizedImage",
    "Point3",
    "WeightField",
    "D435_NOMINAL",
    "D435_CALIBRATED",
    "PRESETS",
    "round_half_away",
    "luminance_to_depth",
    "depth_to_luminance",
    "pixel_to_point",
    "point_to_pixel",
    "normalized_coords",
    "build_weight_field",
    "normalize_image",
    "denormalize_image",
    "backproject",
]


def round_half_away(x):
    """Round to the nearest integer with ties going away from zero.

    numpy's round() ties to even; a fixed away-from-zero rule is used
    everywhere in this package so that independent implementations agree
    bit-exactly on pixel coordinates and luminances.
    """
    x = np.asarray(x)
    out = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return out if out.ndim else float(out)


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters plus the depth range and quantization bit depth.

    The principal point must lie on the sensor ([1, w] x [1, h]); real
    cameras can violate this slightly, but every mapping here assumes it.
    """

    width: int
    height: int
    u0: float
    v0: float
    fx: float
    fy: float
    z_min: float = 0.3
    z_max: float = 0.7
    bit_depth: int = 16

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DomainError("image dimensions must be at least 1x1")
        if not 1 <= self.bit_depth <= 16:
            raise DomainError("bit_depth must be in 1..16")
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError("focal lengths must be positive")
        if not 0 < self.z_min < self.z_max:
            raise DomainError("need 0 < z_min < z_max")
        if not (1 <= self.u0 <= self.width and 1 <= self.v0 <= self.height):
            raise DomainError("principal point must lie within [1,w] x [1,h]")

    @property
    def max_luminance(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def depth_span(self) -> float:
        return self.z_max - self.z_min

    def to_dict(self, with_size: bool = True) -> dict:
        d = {
            "u0": self.u0,
            "v0": self.v0,
            "fx": self.fx,
            "fy": self.fy,
            "z_min": self.z_min,
            "z_max": self.z_max,
            "b": self.bit_depth,
        }
        if with_size:
            d["w"] = self.width
            d["h"] = self.height
        return d

    @classmethod
    def from_dict(cls, d: dict, width: int | None = None, height: int | None = None) -> "CameraIntrinsics":
        """Build intrinsics from a JSON-style dict.

        The dict must carry u0, v0, fx, fy, z_min, z_max and b.  Image
        dimensions come either from the dict (keys "w"/"h") or from the
        explicit arguments (whichever the container format provides).
        """
        try:
            w = int(d["w"]) if width is None else int(width)
            h = int(d["h"]) if height is None else int(height)
            return cls(
                width=w,
                height=h,
                u0=float(d["u0"]),
                v0=float(d["v0"]),
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                z_min=float(d["z_min"]),
                z_max=float(d["z_max"]),
                bit_depth=int(d["b"]),
            )
        except KeyError as e:
            raise DomainError(f"intrinsics dict is missing key {e}") from e

    @classmethod
    def from_json(cls, path: str | Path) -> "CameraIntrinsics":
        with open(path, "r", encoding="ascii") as f:
            return cls.from_dict(json.load(f))

    def save_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="ascii") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")


# Intel RealSense D435 presets at 848x480.  The nominal values are the
# data-sheet numbers; the calibrated set is what a typical unit reports
# after calibration at the same resolution.
D435_NOMINAL = CameraIntrinsics(width=848, height=480, u0=424.0, v0=240.0, fx=415.0, fy=373.0)
D435_CALIBRATED = CameraIntrinsics(width=848, height=480, u0=421.0, v0=243.0, fx=433.0, fy=433.0)

PRESETS = {
    "d435_nominal": D435_NOMINAL,
    "d435_calibrated": D435_CALIBRATED,
}


class Point3(NamedTuple):
    """A point in the camera frame, meters.  Z is positive in front of the
    camera; X grows with pixel columns and Y with pixel rows."""

    X: float
    Y: float
    Z: float


@dataclass(frozen=True, eq=False)
class DepthImage:
    """An h x w matrix of integer luminances tied to its camera."""

    intrinsics: CameraIntrinsics
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.intrinsics.height, self.intrinsics.width):
            raise ShapeError(
                f"pixel matrix {px.shape} does not match intrinsics "
                f"{(self.intrinsics.height, self.intrinsics.width)}"
            )
        if not np.issubdtype(px.dtype, np.integer):
            if not np.all(px == np.floor(px)):
                raise DomainError("luminances must be integers")
        if px.size and (px.min() < 0 or px.max() > self.intrinsics.max_luminance):
            raise DomainError("luminance outside {0 .. 2^b - 1}")
        object.__setattr__(self, "pixels", _as_readonly(px.astype(np.uint16)))


@dataclass(frozen=True, eq=False)
class WeightField:
    """Radial weights of a camera: ruv holds R_uv per pixel, values holds
    R_uv / ((2^b - 1) * r_bar), the factor multiplying luminances to form
    normalized images."""

    intrinsics: CameraIntrinsics
    ruv: np.ndarray
    values: np.ndarray
    r_bar: float

    def __post_init__(self):
        object.__setattr__(self, "ruv", _as_readonly(self.ruv))
        object.__setattr__(self, "values", _as_readonly(self.values))


@dataclass(frozen=True, eq=False)
class NormalizedImage:
    """Unit-interval image: the Hadamard product of a weight field and a
    depth image.  `saturated` counts pixels clipped into [0, 1] by whatever
    operation produced this image (0 for images straight from a camera)."""

    intrinsics: CameraIntrinsics
    pixels: np.ndarray
    saturated: int = field(default=0, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.intrinsics.height, self.intrinsics.width):
            raise ShapeError(
                f"pixel matrix {px.shape} does not match intrinsics "
                f"{(self.intrinsics.height, self.intrinsics.width)}"
            )
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise DomainError("normalized pixels must lie in [0, 1]")
        object.__setattr__(self, "pixels", _as_readonly(px))


def luminance_to_depth(intr: CameraIntrinsics, l):
    """Convert luminance to depth in meters (strictly decreasing in l)."""
    l = np.asarray(l)
    if l.size and ((l < 0).any() or (l > intr.max_luminance).any()):
        raise DomainError("luminance outside {0 .. 2^b - 1}")
    z = (intr.z_min - intr.z_max) / intr.max_luminance * l + intr.z_max
    return z if z.ndim else float(z)


def depth_to_luminance(intr: CameraIntrinsics, z):
    """Convert depth to the nearest luminance level.

    Depths outside [z_min, z_max] are clipped to the corresponding bound;
    the second return value flags which inputs were clipped so callers that
    need strict behaviour can check it.
    """
    z = np.asarray(z, dtype=np.float64)
    clipped = (z < intr.z_min) | (z > intr.z_max)
    zc = np.clip(z, intr.z_min, intr.z_max)
    l = round_half_away(intr.max_luminance * (zc - intr.z_max) / (intr.z_min - intr.z_max))
    l = np.asarray(l).astype(np.int64)
    if z.ndim == 0:
        return int(l), bool(clipped)
    return l, clipped


def pixel_to_point(intr: CameraIntrinsics, u, v, l) -> Point3:
    """Map pixel coordinates and luminance to the 3D point they observe."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if ((u < 1) | (u > intr.width) | (v < 1) | (v > intr.height)).any():
        raise DomainError("pixel outside the image bounds [1,w] x [1,h]")
    z = np.asarray(luminance_to_depth(intr, l))
    x = (u - intr.u0) / intr.fx * z
    y = (v - intr.v0) / intr.fy * z
    if z.ndim == 0 and u.ndim == 0:
        return Point3(float(x), float(y), float(z))
    return Point3(x, y, z)


def point_to_pixel(intr: CameraIntrinsics, p):
    """Project a camera-frame point back to (u, v, luminance).

    u and v are returned real-valued; rounding to integer pixels is a
    separate policy applied only where a consumer requires it.  Points with
    non-positive depth raise DomainError; points projecting outside the
    image bounds or outside [z_min, z_max] raise FrustumError.
    """
    p = np.asarray(p, dtype=np.float64)
    X, Y, Z = p[..., 0], p[..., 1], p[..., 2]
    if (Z <= 0).any():
        raise DomainError("point depth must be positive")
    tol = 1e-9
    if ((Z < intr.z_min - tol) | (Z > intr.z_max + tol)).any():
        raise FrustumError("point depth outside [z_min, z_max]")
    u = intr.fx * X / Z + intr.u0
    v = intr.fy * Y / Z + intr.v0
    if ((u < 1 - 1e-6) | (u > intr.width + 1e-6) | (v < 1 - 1e-6) | (v > intr.height + 1e-6)).any():
        raise FrustumError("point projects outside the image bounds")
    l, _ = depth_to_luminance(intr, np.clip(Z, intr.z_min, intr.z_max))
    if p.ndim == 1:
        return float(u), float(v), int(l)
    return u, v, l


def normalized_coords(intr: CameraIntrinsics, u, v):
    """Dimensionless ray coordinates x = (u - u0)/fx, y = (v - v0)/fy."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = (u - intr.u0) / intr.fx
    y = (v - intr.v0) / intr.fy
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


@lru_cache(maxsize=8)
def build_weight_field(intr: CameraIntrinsics) -> WeightField:
    """Compute R_uv over the pixel grid and its normalization.

    R_uv is 1 at the principal point, constant on ellipses centred there,
    and maximal at one of the four image corners; that corner maximum is
    r_bar.  The cached result is immutable and safe to share.
    """
    u = np.arange(1, intr.width + 1, dtype=np.float64)
    v = np.arange(1, intr.height + 1, dtype=np.float64)
    x = (u - intr.u0) / intr.fx
    y = (v - intr.v0) / intr.fy
    ruv = np.sqrt(1.0 + x[None, :] ** 2 + y[:, None] ** 2)
    corners = ruv[[0, 0, -1, -1], [0, -1, 0, -1]]
    r_bar = float(corners.max())
    values = ruv / (intr.max_luminance * r_bar)
    return WeightField(intrinsics=intr, ruv=ruv, values=values, r_bar=r_bar)


def normalize_image(img: DepthImage, wf: WeightField) -> NormalizedImage:
    """Hadamard product of weight-field values and luminances."""
    if img.intrinsics != wf.intrinsics:
        raise ShapeError("image and weight field have different intrinsics")
    return NormalizedImage(img.intrinsics, wf.values * img.pixels)


def denormalize_image(img: NormalizedImage, wf: WeightField) -> DepthImage:
    """Invert normalize_image, recovering integer luminances."""
    if img.intrinsics != wf.intrinsics:
        raise ShapeError("image and weight field have different intrinsics")
    l = round_half_away(img.pixels / wf.values)
    l = np.clip(l, 0, img.intrinsics.max_luminance)
    return DepthImage(img.intrinsics, l.astype(np.uint16))


def backproject(img: DepthImage) -> np.ndarray:
    """Map every pixel of a depth image to its 3D point.

    Returns an (h*w, 3) float64 array in row-major pixel order; this is the
    visible point cloud of the image (exactly one point per pixel).
    """
    intr = img.intrinsics
    u = np.arange(1, intr.width + 1, dtype=np.float64)
    v = np.arange(1, intr.height + 1, dtype=np.float64)
    z = luminance_to_depth(intr, img.pixels)
    x = (u - intr.u0) / intr.fx
    y = (v - intr.v0) / intr.fy
    X = x[None, :] * z
    Y = y[:, None] * z
    return np.stack([X.ravel(), Y.ravel(), z.ravel()], axis=1)
