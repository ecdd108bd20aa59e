"""Command-line entry point.

    ponita grid --dim 3 --n 12 --seed 7 --out grids/
    ponita audit --trials 100 --seed 1
    ponita gradcheck --seed 0
    ponita nbody gen --count 2000 --seed 3 --out data.json
    ponita nbody train --data data.json --out runs/nbody
    ponita nbody eval --checkpoint runs/nbody/model.pckp --data data.json
    ponita toy-energy gen|train|eval ...
    ponita infer --checkpoint runs/nbody/model.pckp --data data.json --out pred.json

Exit status: 0 on success, 1 when an audit or gradient check fails, 2 on
usage or input errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .grids import grid_filename, min_pairwise_angle, repulsion_grid, write_grid
from .io import read_dataset, write_dataset
from .nbody import dataset_meta, nbody_generate
from .toy_energy import toy_generate
from .training import (
    TrainConfig,
    TrainingDiverged,
    evaluate_run,
    featurize,
    load_run,
    task_grid,
    train,
)

log = logging.getLogger("ponita")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- commands

def cmd_grid(args):
    if args.dim not in (2, 3):
        raise UsageError("--dim must be 2 or 3")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    grid = repulsion_grid(args.dim, args.n, rng_seed=args.seed)
    out = Path(args.out)
    if out.suffix != ".sgrd":
        out.mkdir(parents=True, exist_ok=True)
        out = out / grid_filename(args.dim, args.n, args.seed)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_grid(out, grid)
    angle = np.degrees(min_pairwise_angle(grid)) if args.n > 1 else float("nan")
    print(f"wrote {out} (N={args.n}, min angle {angle:.4f} deg)")
    return EXIT_OK


def _finish_report(report, out):
    for line in report.lines():
        print(line)
    print("audit: " + ("PASS" if report.passed else "FAIL"))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_audit(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    report = audit_mod.audit_equivariance(trials=args.trials, rng_seed=args.seed,
                                          gradients=not args.skip_gradients)
    return _finish_report(report, args.out)


def cmd_gradcheck(args):
    report = audit_mod.AuditReport(audit_mod.gradient_checks(args.seed))
    return _finish_report(report, args.out)


def _generate(task, args):
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if task == "nbody":
        samples = nbody_generate(args.count, args.seed)
        meta = dataset_meta(args.count, args.seed, 1e-3, 1000)
    else:
        samples = toy_generate(args.count, args.seed)
        meta = {"task": "toy-energy", "count": args.count, "seed": args.seed}
    write_dataset(args.out, samples, meta)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def _load(path):
    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    samples, _meta = read_dataset(path)
    return samples


def _train(task, args):
    cfg = TrainConfig(task=task, model=args.model, layers=args.layers, channels=args.channels,
                      grid_n=args.n, epochs=args.epochs, batch=args.batch, lr=args.lr,
                      seed=args.seed, f32=args.f32)
    samples = _load(args.data)
    out = Path(args.out or f"runs/{task}-{args.model}")

    def progress(epoch, lr, tl, vl):
        log.info("epoch %d lr %.3g train %.6g val %.6g", epoch, lr, tl, vl)

    try:
        result = train(cfg, samples, out, progress)
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"checkpoint {out / 'model.pckp'}  params {result.parameter_count}  "
          f"final train {result.train_losses[-1]:.6g}  val {result.final_val:.6g}")
    return EXIT_OK


def _eval(task, args):
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    loss = evaluate_run(args.checkpoint, _load(args.data))
    print(f"loss {loss:.6g}")
    return EXIT_OK


def cmd_infer(args):
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    cfg, model, params = load_run(args.checkpoint)
    samples = _load(args.data)
    graphs = featurize(cfg, samples, task_grid(cfg))
    preds = []
    for g in graphs:
        if cfg.task == "nbody":
            out = model(params, g).data[:, :, 0]
            preds.append({"final_positions": (g.positions + out).tolist()})
        else:
            from .models import energy_and_forces
            e, f = energy_and_forces(model, params, g)
            preds.append({"energy": float(e.data[0]), "forces": f.data.tolist()})
    text = json.dumps({"task": cfg.task, "predictions": preds})
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(preds)} predictions to {args.out}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _task_parser(sub, task):
    p = sub.add_parser(task, help=f"{task} data generation, training and evaluation")
    actions = p.add_subparsers(dest="action", required=True)
    g = actions.add_parser("gen", help="generate a dataset")
    g.add_argument("--count", type=int, default=2000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    defaults = TrainConfig()
    t = actions.add_parser("train", help="train a model; writes checkpoint and metrics.csv")
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=("ponita", "pnita"), default="ponita")
    t.add_argument("--layers", type=int, default=defaults.layers)
    t.add_argument("--channels", type=int, default=defaults.channels)
    t.add_argument("--n", type=int, default=defaults.grid_n, help="grid size")
    t.add_argument("--epochs", type=int, default=defaults.epochs)
    t.add_argument("--batch", type=int, default=defaults.batch)
    t.add_argument("--lr", type=float, default=defaults.lr)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--f32", action="store_true", help="float32 parameters and activations")
    t.add_argument("--out", help="run directory")
    e = actions.add_parser("eval", help="loss of a trained run on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="ponita", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="write a repulsion grid (SGRD)")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("audit", help="invariance/equivariance/gradient battery")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-gradients", action="store_true")
    p.add_argument("--out", help="write the report as JSON")

    p = sub.add_parser("gradcheck", help="finite-difference checks only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    _task_parser(sub, "nbody")
    _task_parser(sub, "toy-energy")

    p = sub.add_parser("infer", help="predictions of a trained run")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "grid":
            return cmd_grid(args)
        if args.command == "audit":
            return cmd_audit(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command == "infer":
            return cmd_infer(args)
        task = args.command
        if args.action == "gen":
            return _generate(task, args)
        if args.action == "train":
            return _train(task, args)
        return _eval(task, args)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"ponita: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
