"""Command-line surface: regions, bounds, noise, train, experiment, fit.

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bounds as bd
from .distribution import (
    A3UnverifiableError,
    A3VerificationError,
    Dataset,
    MarginTooLargeError,
    NormalizationError,
)
from .geometry import Box, EnumerationError, count_active_pieces, enumerate_regions, piece_vertices
from .harness import (
    ConfigError,
    ExperimentConfig,
    fit_rate_slope,
    run_rate_experiment,
    verify_a3_report,
)
from .network import NetworkFormatError, deserialize, serialize
from .training import TrainConfig, TrainingDivergedError, hinge_erm

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (ConfigError, NetworkFormatError, FileNotFoundError, ValueError,
                  json.JSONDecodeError, KeyError)
_NUMERIC_ERRORS = (EnumerationError, TrainingDivergedError, NormalizationError,
                   MarginTooLargeError, A3UnverifiableError, A3VerificationError,
                   np.linalg.LinAlgError)


def _parse_box(text: str, d: int) -> Box:
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 2:
        return Box([vals[0]] * d, [vals[1]] * d)
    if len(vals) == 2 * d:
        return Box(vals[:d], vals[d:])
    raise ValueError(f"--box needs 'lo,hi' or {2 * d} comma-separated numbers")


def _load_net(path: str):
    with open(path) as fh:
        return deserialize(fh.read())


def _cmd_regions(args) -> int:
    net = _load_net(args.net)
    box = _parse_box(args.box, net.input_dim)
    decomp = enumerate_regions(net, box)
    total = decomp.num_regions
    active = count_active_pieces(decomp)
    verts = piece_vertices(decomp)
    print(f"regions: {total}  active: {active}  vertices: {len(verts)}")
    if args.dump:
        with open(args.dump, "w") as fh:
            for region in decomp.regions:
                fh.write(json.dumps({
                    "pattern": region.pattern_bits,
                    "gradient": [float(g) for g in region.gradient],
                    "offset": float(region.offset),
                    "vertices": [[float(v) for v in row] for row in region.cell.vertices],
                }) + "\n")
    return 0


def _cmd_bounds(args) -> int:
    widths_arg = getattr(args, "widths", None)
    widths = [int(w) for w in widths_arg.split(",")] if widths_arg else []
    if args.which == "serra":
        report = bd.serra_report(args.input_dim, widths)
    elif args.which == "montufar":
        report = bd.montufar_report(args.input_dim, widths)
    elif args.which == "active":
        report = bd.active_report(args.input_dim, widths)
    elif args.which == "bracketing":
        report = bd.bracketing_report(args.d, args.s, args.delta)
    elif args.which == "gclass":
        report = bd.gclass_report(args.n, args.l, args.d, args.delta)
    else:
        report = bd.covering_report(args.l, args.n, args.s, args.b, args.delta)
    print(report.to_json())
    return 0


def _cmd_noise(args) -> int:
    if args.teacher:
        report = verify_a3_report(teacher_net=_load_net(args.teacher))
    else:
        report = verify_a3_report(
            n_seeds=args.seeds,
            d=args.d,
            hidden_widths=tuple(int(w) for w in args.widths.split(",")),
            master_seed=args.master_seed,
        )
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_train(args) -> int:
    ds = Dataset.from_csv(args.data)
    widths = tuple(int(w) for w in args.widths.split(","))
    if widths[0] != ds.dim:
        raise ConfigError(f"--widths starts with {widths[0]} but data is d={ds.dim}")
    config = TrainConfig(
        hidden_widths=widths[1:],
        epochs=args.epochs,
        eta0=args.eta0,
        restarts=args.restarts,
        seed=args.seed,
    )
    student = hinge_erm(ds, config)
    with open(args.out, "w") as fh:
        fh.write(serialize(student.net) + "\n")
    if args.history:
        with open(args.history, "w") as fh:
            fh.write("epoch,hinge_risk,zero_one_risk\n")
            for epoch, (h, z) in enumerate(student.history):
                fh.write(f"{epoch},{repr(h)},{repr(z)}\n")
    print(f"final hinge risk: {student.final_hinge_risk:.6g}  "
          f"0-1 risk: {student.final_01_risk:.6g}  (restart {student.restart})")
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.outdir is not None:
        doc["outdir"] = args.outdir
    config = ExperimentConfig.from_json(doc)
    result = run_rate_experiment(config, progress=args.progress)
    print(json.dumps({
        "slope": result.slope,
        "stderr": result.stderr,
        "r2": result.r2,
        "rows": len(result.rows),
        "diverged": len(result.diverged),
        "outdir": config.outdir,
    }))
    return 0


def _cmd_fit(args) -> int:
    rows = []
    with open(args.rows) as fh:
        header = fh.readline().strip().split(",")
        n_i, e_i = header.index("n"), header.index("excess_risk")
        for line in fh:
            if line.strip():
                parts = line.strip().split(",")
                rows.append((int(parts[n_i]), float(parts[e_i])))
    slope, stderr, r2 = fit_rate_slope(rows)
    print(json.dumps({"slope": slope, "stderr": stderr, "r2": r2}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reluclass",
        description="Linear-region geometry, capacity bounds, and excess-risk "
                    "rate experiments for small ReLU classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regions", help="enumerate linear regions of a net over a box")
    p.add_argument("--net", required=True, help="network JSON file")
    p.add_argument("--box", default="0,1", help="'lo,hi' for all dims, or per-dim list")
    p.add_argument("--dump", help="write one region per line as JSON")
    p.set_defaults(func=_cmd_regions)

    p = sub.add_parser("bounds", help="evaluate a closed-form bound")
    which = p.add_subparsers(dest="which", required=True)
    for name in ("serra", "montufar", "active"):
        q = which.add_parser(name)
        q.add_argument("--input-dim", type=int, required=True)
        q.add_argument("--widths", required=True, help="hidden widths, comma separated")
        q.set_defaults(func=_cmd_bounds)
    q = which.add_parser("bracketing")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--s", type=int, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.set_defaults(func=_cmd_bounds)
    q = which.add_parser("gclass")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--l", type=int, required=True)
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.set_defaults(func=_cmd_bounds)
    q = which.add_parser("covering")
    q.add_argument("--l", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--s", type=int, required=True)
    q.add_argument("--b", type=float, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("noise", help="verify analytic noise constants on teachers")
    p.add_argument("--teacher", help="check a single network JSON file")
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--widths", default="8")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("train", help="hinge-train a student on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--widths", required=True, help="input dim then hidden widths, e.g. 2,8,8")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--eta0", type=float, default=0.1)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output network JSON")
    p.add_argument("--history", help="write per-epoch risks as CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("experiment", help="run a rate experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--outdir", help="override output directory")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("fit", help="fit a log-log slope to a rows.csv")
    p.add_argument("--rows", required=True)
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
