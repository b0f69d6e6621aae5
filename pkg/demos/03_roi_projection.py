"""From a 3D effect box to the image rectangle it can touch.

Every shaping action only deforms material inside a box around its
position.  Projecting the box gives the region of interest: the only
pixels an action can change.  The exact projection picks, per rectangle
edge, whichever box corner projects furthest out; the thin-box shortcut
evaluates everything at one depth, making the ROI shape identical for all
positions of an action type.

Run:  python3 demos/03_roi_projection.py
"""

import numpy as np

from moldkit import (
    D435_CALIBRATED,
    EffectBox,
    Point3,
    bundled_actions,
    project_box,
    project_box_thin,
    valid_position_range,
)

intr = D435_CALIBRATED
Z = 0.45

print("action set (box half-extents in mm):")
for spec in bundled_actions():
    print(f"  {spec.name:6s} dx={spec.dx * 1000:5.0f} dy={spec.dy * 1000:5.0f} dz={spec.dz * 1000:4.0f}"
          f"   positions: {len(spec.positions)}")

poke = [s for s in bundled_actions() if s.name == "poke"][0]
print(f"\npoke ROI at a few positions (thin projection, shared {0}x{0} shape):")
for X, Y in ((0.0, 0.0), (-0.2, 0.1), (0.2, -0.15)):
    rect = project_box_thin(intr, poke.box_at(Point3(X, Y, Z)))
    exact = project_box(intr, poke.box_at(Point3(X, Y, Z)))
    print(f"  t=({X:+.2f},{Y:+.2f}): thin {rect.width}x{rect.height} at ({rect.u_min},{rect.v_min})"
          f"   exact {exact.width}x{exact.height} at ({exact.u_min},{exact.v_min})")

# Whichever corner is extremal depends on the signs of the box bounds.
neg = EffectBox(Point3(-0.15, -0.10, Z), (0.03, 0.03, 0.025))
pos = EffectBox(Point3(+0.15, +0.10, Z), (0.03, 0.03, 0.025))
print("\ncorner selection (all-negative vs all-positive box):")
for name, box in (("negative", neg), ("positive", pos)):
    z_pick = "near" if box.x_bounds[0] < 0 else "far"
    print(f"  {name}: left edge comes from the {z_pick} face -> {project_box(intr, box)}")

# Positions that keep the whole box in frame, per action.
print("\nin-frame position ranges at Z = 450 mm (mm):")
for spec in bundled_actions():
    (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, spec.half_extents, Z)
    print(f"  {spec.name:6s} X in [{x_lo * 1000:+7.1f}, {x_hi * 1000:+7.1f}]"
          f"   Y in [{y_lo * 1000:+7.1f}, {y_hi * 1000:+7.1f}]")
