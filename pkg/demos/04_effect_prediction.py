"""Learning what an action does to its patch of the image.

The simulator stands in for a robot working real material: stamp-based
plastic deformation, displaced-volume ridges, per-action execution noise,
and a top-down depth camera.  From recorded prior/posterior patch pairs
the toolkit builds, per action, the mean difference (the training-free
difference-compensation predictor) and a refine mask marking the pixels
the action reliably modifies.

Run:  python3 demos/04_effect_prediction.py
"""

import numpy as np

from moldkit import simkit
from moldkit.predict import (
    MeanDiffPredictor,
    RefinedPredictor,
    evaluate,
    fit_patch_model,
)

poke = [s for s in simkit.bundled_actions() if s.name == "poke"][0]

print("generating 60 prior/posterior poke pairs (mixed surfaces, default noise)...")
ds = simkit.gen_dataset(poke, 60, seed=42)
print(f"patch shape: {ds.priors.shape[2]}x{ds.priors.shape[1]} pixels, {len(ds)} pairs")

train = ds.subset(np.arange(45))
test = ds.subset(np.arange(45, 60))
model = fit_patch_model(train)

# Normalized units scale back to depth by r_bar * (z_max - z_min).
unit_to_mm = 1.5677 * 0.4 * 1000
print(f"\nmean difference: min {model.delta.min():+.4f} "
      f"(about {-model.delta.min() * unit_to_mm:.0f} mm of material removed)")
print(f"refine mask: {model.mask.sum()} of {model.mask.size} pixels marked as reliably modified")
print(f"otsu level: {model.otsu_level:.4f}, degenerate: {model.degenerate}")

# ASCII view of the learned imprint (rows downsampled).
chars = " .:-=+*#%@"
mag = np.abs(model.delta) / np.abs(model.delta).max()
for row in mag[::3]:
    print("   " + "".join(chars[int(x * (len(chars) - 1))] for x in row[::2]))

# Holdout error of the three prediction modes.  The learned generators of
# the companion trainer plug in through a file exchange; here mocks stand
# in for them (prior + delta for the direct one, identity for the
# denoising one), which makes both modes coincide with mode D.
scores = {
    "D": evaluate(test, RefinedPredictor(model=model, mode="D")),
    "CR (mock)": evaluate(test, RefinedPredictor(model=model, mode="CR", base=MeanDiffPredictor(model))),
    "DCR (mock)": evaluate(test, RefinedPredictor(model=model, mode="DCR", base=lambda b: b)),
}
print("\nholdout error, 15 unseen pairs:")
for name, (mean_mm, std_mm) in scores.items():
    print(f"  {name:10s} {mean_mm:.3f} +/- {std_mm:.3f} mm")
