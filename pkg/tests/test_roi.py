import numpy as np
import pytest

from moldkit.camera import (
    CameraIntrinsics,
    D435_CALIBRATED,
    DepthImage,
    NormalizedImage,
    Point3,
    build_weight_field,
    normalize_image,
    round_half_away,
)
from moldkit.errors import DomainError, InfeasibleError, PreconditionError, ShapeError
from moldkit.metric import distance
from moldkit.roi import (
    ActionSpec,
    EffectBox,
    Patch,
    RoiRect,
    even_ceil,
    extract_patch,
    inject_patch,
    load_actions,
    bundled_actions,
    position_grid,
    project_box,
    project_box_thin,
    save_actions,
    valid_position_range,
)


def corner_oracle(intr, box):
    """Bounding rectangle of the 8 explicitly projected box corners,
    rounded and clamped exactly like project_box."""
    pts = box.corners()
    u = intr.fx * pts[:, 0] / pts[:, 2] + intr.u0
    v = intr.fy * pts[:, 1] / pts[:, 2] + intr.v0
    u = round_half_away(u)
    v = round_half_away(v)
    clamp = lambda x, hi: int(max(1, min(x, hi)))
    return RoiRect(
        clamp(u.min(), intr.width),
        clamp(v.min(), intr.height),
        clamp(u.max(), intr.width),
        clamp(v.max(), intr.height),
    )


def random_box(rng, z=0.45):
    he = (
        float(rng.uniform(0.005, 0.12)),
        float(rng.uniform(0.005, 0.12)),
        float(rng.uniform(0.005, 0.08)),
    )
    t = Point3(float(rng.uniform(-0.35, 0.35)), float(rng.uniform(-0.2, 0.2)), float(rng.uniform(0.35, 0.6)))
    return EffectBox(center=t, half_extents=he)


def intr_for_tests():
    return D435_CALIBRATED


class TestProjectBox:
    def test_on_axis_box_centred_at_principal_point(self):
        intr = CameraIntrinsics(width=101, height=81, u0=51.0, v0=41.0, fx=90.0, fy=90.0)
        box = EffectBox(Point3(0.0, 0.0, 0.45), (0.05, 0.04, 0.02))
        rect = project_box(intr, box)
        assert rect.u_min + rect.u_max == pytest.approx(2 * intr.u0, abs=1)
        assert rect.v_min + rect.v_max == pytest.approx(2 * intr.v0, abs=1)

    def test_matches_corner_oracle_on_random_boxes(self):
        intr = intr_for_tests()
        rng = np.random.default_rng(21)
        for _ in range(1000):
            box = random_box(rng)
            assert project_box(intr, box) == corner_oracle(intr, box)

    def test_corner_selection_by_sign(self):
        # All-negative box: u_min comes from the near face; all-positive:
        # u_min comes from the far face.
        intr = intr_for_tests()
        z, dz = 0.45, 0.025
        neg = EffectBox(Point3(-0.15, -0.1, z), (0.03, 0.03, dz))
        pos = EffectBox(Point3(0.15, 0.1, z), (0.03, 0.03, dz))
        r_neg = project_box(intr, neg)
        r_pos = project_box(intr, pos)
        x_lo_neg = neg.x_bounds[0]
        assert r_neg.u_min == round_half_away(intr.fx * x_lo_neg / (z - dz) + intr.u0)
        x_lo_pos = pos.x_bounds[0]
        assert r_pos.u_min == round_half_away(intr.fx * x_lo_pos / (z + dz) + intr.u0)

    def test_nonpositive_near_depth_rejected(self):
        intr = intr_for_tests()
        with pytest.raises(DomainError):
            project_box(intr, EffectBox(Point3(0.0, 0.0, 0.02), (0.01, 0.01, 0.05)))


class TestProjectBoxThin:
    def test_poke_shape_near_formula(self):
        # 2 * 433 * 0.022 / 0.45 = 42.3 and 2 * 433 * 0.018 / 0.45 = 34.6;
        # stored sizes are the next even integers.
        intr = intr_for_tests()
        box = EffectBox(Point3(0.0, 0.0, 0.45), (0.022, 0.018, 0.025))
        rect = project_box_thin(intr, box)
        assert abs(2 * intr.fx * 0.022 / 0.45 - 42.3) < 0.1
        assert rect.width == even_ceil(2 * intr.fx * 0.022 / 0.45) == 44
        assert rect.height == even_ceil(2 * intr.fy * 0.018 / 0.45) == 36

    def test_shape_independent_of_position(self):
        intr = intr_for_tests()
        he = (0.04, 0.03, 0.025)
        shapes = set()
        rng = np.random.default_rng(22)
        for _ in range(50):
            t = Point3(float(rng.uniform(-0.2, 0.2)), float(rng.uniform(-0.1, 0.1)), 0.45)
            rect = project_box_thin(intr, EffectBox(t, he))
            shapes.add((rect.width, rect.height))
        assert len(shapes) == 1

    def test_close_to_exact_projection(self):
        intr = intr_for_tests()
        rng = np.random.default_rng(23)
        for _ in range(200):
            z = float(rng.uniform(0.4, 0.55))
            dz = float(rng.uniform(0.002, 0.14 * z))
            he = (float(rng.uniform(0.01, 0.06)), float(rng.uniform(0.01, 0.06)), dz)
            t = Point3(float(rng.uniform(-0.08, 0.08)), float(rng.uniform(-0.05, 0.05)), z)
            box = EffectBox(t, he)
            thin = project_box_thin(intr, box)
            exact = project_box(intr, box)
            # Corner error bound: fx * |X| * dz / (Z * (Z - dz)), plus one
            # pixel of rounding and two of even-ceil slack per edge.
            for f, lo, hi, lo_e, hi_e, bound_coord in [
                (intr.fx, thin.u_min, thin.u_max, exact.u_min, exact.u_max, max(abs(t.X) + he[0], 1e-9)),
                (intr.fy, thin.v_min, thin.v_max, exact.v_min, exact.v_max, max(abs(t.Y) + he[1], 1e-9)),
            ]:
                tol = f * bound_coord * dz / (z * (z - dz)) + 3.0
                assert abs(lo - lo_e) <= tol
                assert abs(hi - hi_e) <= tol

    def test_dz_to_zero_limit(self):
        intr = intr_for_tests()
        t = Point3(0.05, -0.03, 0.45)
        he = (0.03, 0.02, 1e-9)
        thin = project_box_thin(intr, EffectBox(t, he))
        exact = project_box(intr, EffectBox(t, he))
        assert abs(thin.u_min - exact.u_min) <= 1
        assert abs(thin.v_min - exact.v_min) <= 1
        assert thin.width in (exact.width, exact.width + 1, exact.width + 2)

    def test_ratio_bound(self):
        intr = intr_for_tests()
        with pytest.raises(PreconditionError):
            project_box_thin(intr, EffectBox(Point3(0.0, 0.0, 0.4), (0.02, 0.02, 0.15)))
        with pytest.warns(UserWarning):
            project_box_thin(intr, EffectBox(Point3(0.0, 0.0, 0.4), (0.02, 0.02, 0.08)))

    def test_configured_roi_size_is_authoritative(self):
        intr = intr_for_tests()
        box = EffectBox(Point3(0.0, 0.0, 0.45), (0.022, 0.018, 0.025))
        rect = project_box_thin(intr, box, roi_px=(40, 45))
        assert (rect.width, rect.height) == (40, 45)
        derived = project_box_thin(intr, box)
        assert (rect.u_min, rect.v_min) == (derived.u_min, derived.v_min)


class TestValidPositionRange:
    def test_tiny_box_spans_frustum_cross_section(self):
        intr = CameraIntrinsics(width=100, height=80, u0=50.0, v0=40.0, fx=90.0, fy=90.0)
        z, dz = 0.45, 1e-6
        (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, (1e-6, 1e-6, dz), z)
        assert x_lo == pytest.approx((1 - intr.u0) * z / intr.fx, abs=1e-4)
        assert x_hi == pytest.approx((intr.width - intr.u0) * z / intr.fx, abs=1e-4)
        assert y_lo == pytest.approx((1 - intr.v0) * z / intr.fy, abs=1e-4)

    def test_grasp_range_smaller_than_poke(self):
        intr = intr_for_tests()
        (gx, gy) = valid_position_range(intr, (0.218, 0.195, 0.05), 0.45)
        (px, py) = valid_position_range(intr, (0.022, 0.018, 0.05), 0.45)
        assert gx[0] > px[0] and gx[1] < px[1]
        assert gy[0] > py[0] and gy[1] < py[1]

    def test_interior_positions_never_clamp(self):
        intr = intr_for_tests()
        rng = np.random.default_rng(24)
        for spec in bundled_actions():
            (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, spec.half_extents, 0.45)
            for _ in range(100):
                t = Point3(float(rng.uniform(x_lo, x_hi)), float(rng.uniform(y_lo, y_hi)), 0.45)
                box = spec.box_at(t)
                rect = project_box(intr, box)
                oracle = corner_oracle(intr, box)
                assert rect == oracle
                assert 1 <= rect.u_min <= rect.u_max <= intr.width
                assert 1 <= rect.v_min <= rect.v_max <= intr.height

    def test_oversized_box_infeasible(self):
        intr = intr_for_tests()
        with pytest.raises(InfeasibleError):
            valid_position_range(intr, (0.5, 0.5, 0.05), 0.45)


class TestPatches:
    def _image(self, seed=0):
        intr = CameraIntrinsics(width=40, height=30, u0=20.0, v0=15.0, fx=50.0, fy=50.0)
        wf = build_weight_field(intr)
        rng = np.random.default_rng(seed)
        img = DepthImage(intr, rng.integers(0, intr.max_luminance + 1, size=(30, 40)))
        return intr, normalize_image(img, wf)

    def test_full_image_rect_identity(self):
        intr, img = self._image()
        rect = RoiRect(1, 1, intr.width + 1, intr.height + 1)
        with pytest.raises(ShapeError):
            extract_patch(img, rect)  # bottom-right corner beyond bounds
        rect = RoiRect(1, 1, intr.width, intr.height)
        patch = extract_patch(img, rect)
        np.testing.assert_array_equal(patch.pixels, img.pixels[:-1, :-1])

    def test_extract_inject_roundtrip(self):
        _, img = self._image()
        rng = np.random.default_rng(25)
        for _ in range(50):
            u0 = int(rng.integers(1, 35))
            v0 = int(rng.integers(1, 25))
            rect = RoiRect(u0, v0, u0 + int(rng.integers(1, 40 - u0 + 1)), v0 + int(rng.integers(1, 30 - v0 + 1)))
            out = inject_patch(img, extract_patch(img, rect))
            np.testing.assert_array_equal(out.pixels, img.pixels)
            assert out.saturated == 0

    def test_outside_pixels_untouched(self):
        _, img = self._image()
        rect = RoiRect(5, 7, 15, 14)
        patch = Patch(rect, np.zeros((rect.height, rect.width)))
        out = inject_patch(img, patch)
        mask = np.ones_like(img.pixels, dtype=bool)
        mask[rect.slices] = False
        np.testing.assert_array_equal(out.pixels[mask], img.pixels[mask])
        assert not out.pixels[rect.slices].any()

    def test_clamping_and_saturation_count(self):
        _, img = self._image()
        rect = RoiRect(2, 2, 6, 5)
        vals = np.full((rect.height, rect.width), 0.5)
        vals[0, 0] = 1.7
        vals[1, 1] = -0.2
        out = inject_patch(img, Patch(rect, vals))
        assert out.saturated == 2
        assert out.pixels[rect.slices][0, 0] == 1.0
        assert out.pixels[rect.slices][1, 1] == 0.0

    def test_distance_depends_only_on_rect(self):
        intr, img = self._image()
        rng = np.random.default_rng(26)
        rect = RoiRect(9, 4, 21, 19)
        patch = Patch(rect, rng.uniform(0.0, 1.0, size=(rect.height, rect.width)))
        out = inject_patch(img, patch)
        rep = distance(img, out)
        inside = np.abs(img.pixels[rect.slices] - out.pixels[rect.slices]).sum()
        assert rep.d_unit == pytest.approx(inside / img.pixels.size, rel=1e-12)

    def test_patch_shape_validation(self):
        with pytest.raises(ShapeError):
            Patch(RoiRect(1, 1, 4, 4), np.zeros((2, 2)))


class TestActionFiles:
    def test_bundled_actions_table(self):
        specs = {s.name: s for s in bundled_actions()}
        assert set(specs) == {"grasp", "knock", "press", "pinch", "poke"}
        assert (specs["grasp"].dx, specs["grasp"].dy, specs["grasp"].dz) == (0.218, 0.195, 0.05)
        assert (specs["knock"].dx, specs["knock"].dy) == (0.084, 0.075)
        assert (specs["press"].dx, specs["press"].dy) == (0.046, 0.103)
        assert (specs["pinch"].dx, specs["pinch"].dy) == (0.042, 0.085)
        assert (specs["poke"].dx, specs["poke"].dy) == (0.022, 0.018)
        for s in specs.values():
            assert s.positions.shape == (15, 3)
            assert (s.positions[:, 2] == 0.45).all()

    def test_positions_respect_frame_bound(self):
        intr = intr_for_tests()
        for spec in bundled_actions():
            (x_lo, x_hi), (y_lo, y_hi) = valid_position_range(intr, spec.half_extents, 0.45)
            assert (spec.positions[:, 0] >= x_lo - 1e-12).all()
            assert (spec.positions[:, 0] <= x_hi + 1e-12).all()
            assert (spec.positions[:, 1] >= y_lo - 1e-12).all()
            assert (spec.positions[:, 1] <= y_hi + 1e-12).all()

    def test_save_load_roundtrip(self, tmp_path):
        specs = bundled_actions()
        path = tmp_path / "actions.json"
        save_actions(path, specs)
        back = load_actions(path)
        assert [s.name for s in back] == [s.name for s in specs]
        for a, b in zip(specs, back):
            assert (a.dx, a.dy, a.dz) == (b.dx, b.dy, b.dz)
            np.testing.assert_allclose(a.positions, b.positions, atol=1e-12)

    def test_roi_override_roundtrips(self, tmp_path):
        import dataclasses

        spec = dataclasses.replace(bundled_actions()[-1], roi_px=(40, 45))
        path = tmp_path / "actions.json"
        save_actions(path, [spec])
        back = load_actions(path)[0]
        assert back.roi_px == (40, 45)


class TestPositionGrid:
    def test_deterministic_and_mm_aligned(self):
        intr = intr_for_tests()
        a = position_grid(intr, (0.022, 0.018, 0.05), 0.45, 15, cols=5)
        b = position_grid(intr, (0.022, 0.018, 0.05), 0.45, 15, cols=5)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a * 1000, np.round(a * 1000), atol=1e-9)

    def test_workspace_constraint(self):
        intr = intr_for_tests()
        grid = position_grid(intr, (0.084, 0.075, 0.05), 0.45, 15, workspace=(0.5, 0.4))
        assert (np.abs(grid[:, 0]) + 0.084 <= 0.25 + 1e-9).all()
        assert (np.abs(grid[:, 1]) + 0.075 <= 0.20 + 1e-9).all()

    def test_infeasible_workspace(self):
        intr = intr_for_tests()
        with pytest.raises(InfeasibleError):
            position_grid(intr, (0.218, 0.195, 0.05), 0.45, 15, workspace=(0.43, 0.38))
