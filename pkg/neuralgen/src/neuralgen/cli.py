"""neuralgen command line: train a patch generator, or serve one."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dimgio import DimgError, read_dimg
from .serve import serve_forever, serve_once
from .train import (
    TrainConfig,
    TrainConfigError,
    load_delta,
    load_model,
    load_pairs,
    save_loss_log,
    save_model,
    train,
)
from .unet import GeneratorSpec


def cmd_train(args) -> int:
    priors, posteriors = load_pairs(args.priors, args.posteriors)
    n, h, w = priors.shape
    spec = GeneratorSpec(width=w, height=h, mode="denoise" if args.delta else "direct")
    delta = load_delta(args.delta, (w, h)) if args.delta else None
    config = TrainConfig(epochs=args.epochs, seed=args.seed, batch_size=args.batch_size)

    def log(epoch, loss):
        if epoch % max(1, args.epochs // 10) == 0 or epoch == args.epochs - 1:
            print(f"epoch {epoch:4d}: loss {loss:.6f}")

    model, losses = train(priors, posteriors, spec, config, delta=delta, log=log)
    save_model(args.out, model, losses)
    if args.loss_log:
        save_loss_log(args.loss_log, losses)
    print(f"model ({spec.mode}, {w}x{h}, hash {spec.hash()}) -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    model = load_model(args.model)
    Path(args.dir).mkdir(parents=True, exist_ok=True)
    if args.once:
        answered = serve_once(model, args.dir, timeout=args.timeout)
        return 0 if answered else 1
    print(f"serving {args.model} on {args.dir} (ctrl-c to stop)")
    try:
        serve_forever(model, args.dir)
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neuralgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a generator from DIMG pair files")
    t.add_argument("--priors", required=True)
    t.add_argument("--posteriors", required=True)
    t.add_argument("--delta", help="moldkit model dir; trains the denoising variant")
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--loss-log")
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("serve", help="answer prediction requests in a directory")
    s.add_argument("--model", required=True)
    s.add_argument("--dir", required=True)
    s.add_argument("--once", action="store_true")
    s.add_argument("--timeout", type=float, default=60.0)
    s.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (TrainConfigError, DimgError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
