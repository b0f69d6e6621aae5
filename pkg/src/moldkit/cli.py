"""Command-line surface for the shaping toolkit.

Subcommands cover the full loop: generate synthetic datasets and planning
scenarios (gen), fit per-action patch models with a cross-validated
holdout report (fit), measure the distance between two depth images
(eval), plan an action sequence toward a goal image (plan), execute a plan
on the simulator (replay), and benchmark the image metric against the
brute-force Chamfer baseline (bench).

Every command is reproducible from its arguments and --seed; primary
outputs are byte-identical across re-runs (timings excluded).  Exit codes:
0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import simkit
from .camera import (
    CameraIntrinsics,
    PRESETS,
    backproject,
    build_weight_field,
    denormalize_image,
    normalize_image,
)
from .errors import ConfigError, MoldkitError
from .metric import chamfer_distance, distance, patch_distance
from .pgm import read_pgm, write_pgm
from .planner import PlanLimits, build_instances, plan as run_plan, replay as run_replay
from .predict import (
    PatchModel,
    PredictorBank,
    crossval_report,
    fit_patch_model,
    load_dataset,
    save_dataset,
)
from .roi import load_actions

__all__ = ["main"]


def _dump_json(obj, path: str | Path | None) -> str:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="ascii")
    return text


def _resolve_intrinsics(name: str) -> CameraIntrinsics:
    if name in PRESETS:
        return PRESETS[name]
    p = Path(name)
    if p.exists():
        return CameraIntrinsics.from_json(p)
    raise ConfigError(f"unknown intrinsics preset or file: {name}")


def cmd_gen(args) -> int:
    intr = _resolve_intrinsics(args.intrinsics)
    out = Path(args.out)
    if args.scenario:
        scn = simkit.build_scenario(args.scenario, seed=args.seed, intr=intr)
        simkit.save_scenario(out, scn)
        print(f"scenario {args.scenario!r} (seed {args.seed}) -> {out}")
        return 0
    specs = {s.name: s for s in simkit.bundled_actions()}
    if args.action not in specs:
        raise ConfigError(f"unknown action {args.action!r}; choose from {sorted(specs)}")
    ds = simkit.gen_dataset(
        specs[args.action],
        args.pairs,
        seed=args.seed,
        surface=args.surface,
        intr=intr,
    )
    save_dataset(out, ds, extra_meta={"seed": args.seed, "surface": args.surface})
    print(f"dataset {args.action} x {args.pairs} pairs (seed {args.seed}) -> {out}")
    return 0


def cmd_fit(args) -> int:
    ds = load_dataset(args.dataset)
    folds = crossval_report(ds, k=args.folds, seed=args.seed, erosion_radius=args.erosion_radius)
    for i, (mean_mm, std_mm) in enumerate(folds):
        print(f"fold {i}: holdout error {mean_mm:.3f} +/- {std_mm:.3f} mm")
    means = [m for m, _ in folds]
    print(f"cross-validation: {np.mean(means):.3f} +/- {np.std(means):.3f} mm over {args.folds} folds")
    model = fit_patch_model(ds, erosion_radius=args.erosion_radius)
    model_dir = Path(args.out) / ds.action_name
    model.save(model_dir)
    if model.degenerate:
        print("warning: degenerate refine mask (no detectable effect)")
    print(f"model {ds.action_name} -> {model_dir}")
    return 0


def cmd_eval(args) -> int:
    img_a = read_pgm(args.image_a)
    img_b = read_pgm(args.image_b)
    wf = build_weight_field(img_a.intrinsics)
    rep = distance(normalize_image(img_a, wf), normalize_image(img_b, wf))
    sys.stdout.write(_dump_json({"d_unit": rep.d_unit, "d_mm": rep.d_mm}, args.out))
    return 0


def _load_bank(model_root: str | Path, action_names, mode: str, exchange: str | None) -> PredictorBank:
    root = Path(model_root)
    missing = [n for n in action_names if not (root / n / "meta.json").exists()]
    if missing:
        raise ConfigError(f"no model directory for action(s) {missing} under {root}")
    return PredictorBank.load(root, action_names, mode=mode, exchange_root=exchange)


def cmd_plan(args) -> int:
    initial = read_pgm(args.initial)
    goal = read_pgm(args.goal)
    if initial.intrinsics != goal.intrinsics:
        raise ConfigError("initial and goal images carry different intrinsics")
    specs = load_actions(args.actions)
    if args.predictor in ("CR", "DCR") and not args.exchange:
        raise ConfigError(f"--predictor {args.predictor} requires --exchange")
    bank = _load_bank(args.models, [s.name for s in specs], args.predictor, args.exchange)
    wf = build_weight_field(initial.intrinsics)
    instances = build_instances(initial.intrinsics, specs)
    limits = PlanLimits(
        k_max=args.k_max,
        eps_d_m=args.eps_mm / 1000.0,
        d_bar_m=None if args.d_bar_mm is None else args.d_bar_mm / 1000.0,
    )
    result = run_plan(
        normalize_image(initial, wf), normalize_image(goal, wf), instances, bank, limits
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(out / "predicted.pgm", denormalize_image(result.predicted_final, wf))
    payload = {
        "sequence": [
            {"action": i.action_name, "position": i.position_index} for i in result.sequence
        ],
        "trace_mm": result.trace_mm,
        "truncated": result.truncated,
        "predictor": args.predictor,
    }
    text = _dump_json(payload, out / "plan.json")
    sys.stdout.write(text)
    return 0


def cmd_replay(args) -> int:
    scn = simkit.load_scenario(args.scenario)
    payload = json.loads(Path(args.plan).read_text("ascii"))
    by_name: dict[str, list] = {}
    for inst in build_instances(scn.intrinsics, scn.specs):
        by_name.setdefault(inst.action_name, []).append(inst)
    try:
        sequence = [by_name[s["action"]][int(s["position"])] for s in payload["sequence"]]
    except (KeyError, IndexError) as e:
        raise ConfigError(f"plan does not match the scenario's action set: {e}") from e
    from .planner import Plan

    p = Plan(sequence=sequence, trace_m=[], predicted_final=scn.i0)
    rr = run_replay(p, scn.simulator(replay_seed=args.seed), scn.i_star)
    print(f"d_0 = {rr.trace_mm[0]:.3f} mm")
    for k, inst in enumerate(sequence[: len(rr.trace_mm) - 1]):
        print(f"a_{k + 1} = {inst.label()}: d = {rr.trace_mm[k + 1]:.3f} mm")
    if rr.failure_index is not None:
        print(f"failed at step {rr.failure_index}")
    result = {
        "trace_mm": rr.trace_mm,
        "failure_index": rr.failure_index,
        "monotone": all(b < a for a, b in zip(rr.trace_m, rr.trace_m[1:])),
    }
    if args.out:
        _dump_json(result, args.out)
    return 0


def _time_call(fn, repeats: int, warmup: int = 2) -> float:
    for _ in range(warmup):
        fn()
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    sizes = [(120, 100)] if args.quick else [(480, 395), (848, 480)]
    report = {"sizes": []}
    for w, h in sizes:
        intr = CameraIntrinsics(
            width=w, height=h, u0=(w + 1) / 2, v0=(h + 1) / 2, fx=433.0, fy=433.0
        )
        wf = build_weight_field(intr)
        imgs = []
        for _ in range(2):
            from .camera import DepthImage

            lum = rng.integers(20000, 50000, size=(h, w)).astype(np.uint16)
            imgs.append(normalize_image(DepthImage(intr, lum), wf))
        t_dist = _time_call(lambda: distance(imgs[0], imgs[1]), repeats=args.repeats)
        entry = {"width": w, "height": h, "distance_ms": t_dist * 1000.0}
        run_chamfer = (w, h) == sizes[0] or args.chamfer_full
        if run_chamfer:
            from .camera import DepthImage

            clouds = [backproject(denormalize_image(im, wf)) for im in imgs]
            t0 = time.perf_counter()
            chamfer_distance(clouds[0], clouds[1])
            t_cham = time.perf_counter() - t0
            entry["chamfer_ms"] = t_cham * 1000.0
            entry["speedup"] = t_cham / t_dist
        report["sizes"].append(entry)
    text = _dump_json(report, args.out)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moldkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset or a planning scenario")
    g.add_argument("--action", help="action name for dataset generation")
    g.add_argument("--pairs", type=int, default=100)
    g.add_argument("--scenario", help=f"named scenario: {', '.join(sorted(simkit.SCENARIOS))}")
    g.add_argument("--surface", default="mixed", help="dataset prior surfaces")
    g.add_argument("--intrinsics", default="d435_calibrated")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    f = sub.add_parser("fit", help="fit a patch model from a dataset directory")
    f.add_argument("dataset")
    f.add_argument("--out", required=True, help="model root; the action name is appended")
    f.add_argument("--folds", type=int, default=4)
    f.add_argument("--erosion-radius", type=int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(fn=cmd_fit)

    e = sub.add_parser("eval", help="distance between two depth images")
    e.add_argument("image_a")
    e.add_argument("image_b")
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    p = sub.add_parser("plan", help="plan an action sequence between two images")
    p.add_argument("initial")
    p.add_argument("goal")
    p.add_argument("--actions", required=True, help="actions JSON file")
    p.add_argument("--models", required=True, help="model root directory")
    p.add_argument("--predictor", choices=("D", "CR", "DCR"), default="D")
    p.add_argument("--exchange", help="exchange root for CR/DCR external generators")
    p.add_argument("--k-max", type=int, default=32)
    p.add_argument("--eps-mm", type=float, default=0.002,
                   help="minimum per-step improvement (simulator-scale default)")
    p.add_argument("--d-bar-mm", type=float, default=None, help="optional accuracy target")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_plan)

    r = sub.add_parser("replay", help="execute a plan on the simulator")
    r.add_argument("--plan", required=True)
    r.add_argument("--scenario", required=True, help="scenario directory")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_replay)

    b = sub.add_parser("bench", help="time distance() against brute-force Chamfer")
    b.add_argument("--quick", action="store_true", help="small size for smoke testing")
    b.add_argument("--chamfer-full", action="store_true",
                   help="also run Chamfer at full resolution (slow)")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and bool(args.action) == bool(args.scenario):
        parser.error("gen needs exactly one of --action or --scenario")
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MoldkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
