"""A point-cloud distance computed entirely in image space.

Matching the two points every pixel sees turns the mean 3D distance
between two visible point clouds into a weighted mean absolute difference
of their images.  After folding the weights into "normalized" images, the
metric is a plain mean |a - b|: exact, symmetric, triangle-inequality
compliant, and two to five orders of magnitude faster than brute-force
Chamfer on the same clouds.

Run:  python3 demos/02_pointcloud_distance.py
"""

import time

import numpy as np

from moldkit import (
    CameraIntrinsics,
    DepthImage,
    backproject,
    build_weight_field,
    chamfer_distance,
    distance,
    matched_mean_distance,
    normalize_image,
)

intr = CameraIntrinsics(width=480, height=395, u0=240.5, v0=198.0, fx=433.0, fy=433.0)
wf = build_weight_field(intr)
rng = np.random.default_rng(1)

img_a = DepthImage(intr, rng.integers(20000, 50000, size=(intr.height, intr.width)))
img_b = DepthImage(intr, rng.integers(20000, 50000, size=(intr.height, intr.width)))
na, nb = normalize_image(img_a, wf), normalize_image(img_b, wf)

rep = distance(na, nb)
print(f"image-space distance: d_unit = {rep.d_unit:.6f}, d = {rep.d_mm:.3f} mm")

# Cross-check against the explicit 3D route: backproject both images and
# average the pointwise Euclidean distances.
oracle = matched_mean_distance(img_a, img_b)
print(f"explicit 3D oracle:   d = {oracle * 1000:.3f} mm "
      f"(relative gap {abs(rep.d_meters - oracle) / oracle:.2e})")

# Timing: image metric vs brute-force Chamfer on the same clouds.
for _ in range(3):
    distance(na, nb)
t0 = time.perf_counter()
for _ in range(10):
    distance(na, nb)
t_dist = (time.perf_counter() - t0) / 10
print(f"\ndistance(): {t_dist * 1000:.2f} ms per evaluation at {intr.width}x{intr.height}")

print("chamfer (brute force, same clouds) ... this takes a while")
clouds = [backproject(im) for im in (img_a, img_b)]
t0 = time.perf_counter()
cham = chamfer_distance(clouds[0], clouds[1])
t_cham = time.perf_counter() - t0
print(f"chamfer: {cham * 1000:.3f} mm in {t_cham:.1f} s -> speedup {t_cham / t_dist:,.0f}x")
