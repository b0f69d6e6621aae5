"""Pixels and 3D points are two views of the same data.

A depth image stores an integer luminance per pixel that encodes depth
linearly between z_max (value 0) and z_min (value 2^b - 1).  Combined with
the pinhole intrinsics this gives a bijection between (pixel, luminance)
triplets and 3D points: every image of w x h pixels is exactly a point
cloud of w x h points, no registration required.

Run:  python3 demos/01_depth_camera_mapping.py
"""

import numpy as np

from moldkit import (
    D435_NOMINAL,
    DepthImage,
    backproject,
    build_weight_field,
    depth_to_luminance,
    luminance_to_depth,
    pixel_to_point,
    point_to_pixel,
)

intr = D435_NOMINAL
print(f"camera: {intr.width}x{intr.height}, depth range [{intr.z_min}, {intr.z_max}] m, "
      f"{intr.bit_depth}-bit luminance")

# Luminance <-> depth is a simple affine map.
for l in (0, 32767, intr.max_luminance):
    print(f"  luminance {l:5d} -> depth {luminance_to_depth(intr, l):.6f} m")
l, clipped = depth_to_luminance(intr, 0.45)
print(f"  depth 0.450 m -> luminance {l} (clipped: {clipped})")

# A pixel plus its luminance pins down a full 3D point, and the mapping
# inverts exactly.
u, v, lum = 100, 200, 41000
p = pixel_to_point(intr, u, v, lum)
print(f"\npixel ({u},{v}) @ {lum} -> point ({p.X:+.4f}, {p.Y:+.4f}, {p.Z:.4f}) m")
u2, v2, l2 = point_to_pixel(intr, p)
print(f"point -> pixel ({u2:.6f}, {v2:.6f}) @ {l2}   (round trip is exact)")

# Whole-image version: bijectivity over every pixel of a random image.
rng = np.random.default_rng(0)
img = DepthImage(intr, rng.integers(0, intr.max_luminance + 1, size=(intr.height, intr.width)))
cloud = backproject(img)
print(f"\nbackprojected cloud: {cloud.shape[0]} points (= {intr.width} x {intr.height})")
print(f"depth span seen: [{cloud[:, 2].min():.4f}, {cloud[:, 2].max():.4f}] m")

# The radial weight field: how much farther apart two points are in 3D
# than their plain depth difference suggests, per pixel.
wf = build_weight_field(intr)
print(f"\nweight field: R = 1 at the principal point, R_bar = {wf.r_bar:.4f} at a corner")
print("R along the middle row (every 106th pixel):")
mid = intr.height // 2
print("  " + "  ".join(f"{x:.3f}" for x in wf.ruv[mid, ::106]))
