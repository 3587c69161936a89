"""End-to-end rate experiments: sample, train, measure excess risk, fit slopes.

Determinism contract: (config, master seed) fixes every output byte of
rows.csv.  Each (n, rep) cell derives a child seed by hashing, so any cell can
be recomputed in isolation, and the worker pool only changes wall time, never
results.  Wall-clock timings are therefore kept out of rows.csv unless
explicitly requested (record_timing), and live in report.json instead.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import distribution as dist_mod
from .distribution import (
    Dataset,
    TeacherDistribution,
    a3_constants_analytic,
    excess_risk,
    normalize_teacher,
    sample,
    separable,
)
from .geometry import Box
from .network import NetworkClassSpec, NetworkParams, deserialize, make_random_teacher
from .training import TrainConfig, TrainingDivergedError, hinge_erm

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "Row",
    "RateResult",
    "A3Entry",
    "A3Report",
    "run_rate_experiment",
    "fit_rate_slope",
    "verify_a3_report",
    "child_seed",
    "default_headline_config",
]

ROWS_HEADER = "n,rep,seed,excess_risk,se,train_secs"


class ConfigError(ValueError):
    """Bad experiment configuration or input file."""


def child_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed derived from the master seed and a label path."""
    text = f"{master_seed}|" + "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a rate experiment needs; JSON-serialisable.

    Width lists follow the convention (input_dim, hidden...) with the scalar
    output implied, e.g. student_widths=[2, 16, 16] is a d=2 student with two
    hidden layers of 16.
    """

    d: int = 2
    teacher_widths: tuple[int, ...] = (2, 4)
    student_widths: tuple[int, ...] = (2, 16, 16)
    teacher_file: str | None = None
    mode: str = "overlap"
    tau: float | None = None
    n_grid: tuple[int, ...] = tuple(2 ** k for k in range(8, 15))
    reps: int = 20
    master_seed: int = 2024
    risk_mode: str = "auto"  # "auto" | "exact" | "mc"
    mc_samples: int = 1 << 20
    epochs: int = 400
    eta0: float = 0.5
    restarts: int = 2
    max_abs_weight: float | None = None
    max_sup_norm: float | None = None
    weight_dist: str = "gaussian"
    workers: int | None = None
    record_timing: bool = False
    outdir: str | None = None

    def __post_init__(self):
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ConfigError("n_grid must be strictly ascending")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.mode not in ("overlap", "separable"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.risk_mode not in ("auto", "exact", "mc"):
            raise ConfigError(f"unknown risk_mode {self.risk_mode!r}")
        for name in ("teacher_widths", "student_widths", "n_grid"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if self.teacher_file is None and self.teacher_widths[0] != self.d:
            raise ConfigError("teacher_widths[0] must equal d (widths are [d, hidden...])")
        if self.student_widths[0] != self.d:
            raise ConfigError("student_widths[0] must equal d (widths are [d, hidden...])")

    @classmethod
    def from_json(cls, source) -> "ExperimentConfig":
        if isinstance(source, (str, bytes)):
            try:
                doc = json.loads(source)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid config JSON: {exc}") from exc
        else:
            doc = dict(source)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for name in ("teacher_widths", "student_widths", "n_grid"):
            out[name] = list(out[name])
        return out


def default_headline_config(**overrides) -> ExperimentConfig:
    """The default d=2 rate configuration used by the acceptance run."""
    base = ExperimentConfig()
    return dataclasses.replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class Row:
    n: int
    rep: int
    seed: int
    excess_risk: float
    se: float
    train_secs: float

    def csv(self) -> str:
        return (
            f"{self.n},{self.rep},{self.seed},"
            f"{repr(self.excess_risk)},{repr(self.se)},{repr(self.train_secs)}"
        )


@dataclass(frozen=True)
class RateResult:
    rows: tuple[Row, ...]
    slope: float
    stderr: float
    r2: float
    dropped_n: tuple[int, ...] = ()
    diverged: tuple[tuple[int, int], ...] = ()


def build_distribution(config: ExperimentConfig) -> TeacherDistribution:
    box = Box.unit(config.d)
    if config.teacher_file is not None:
        with open(config.teacher_file) as fh:
            raw = deserialize(fh.read())
    else:
        chain = list(config.teacher_widths) + [1]
        raw = make_random_teacher(chain, seed=child_seed(config.master_seed, "teacher"),
                                  weight_dist=config.weight_dist)
    dist = normalize_teacher(raw, box)
    if config.mode == "separable":
        dist = separable(dist, config.tau)
    return dist


def _train_config(config: ExperimentConfig, seed: int) -> TrainConfig:
    spec = None
    if config.max_abs_weight is not None and config.max_sup_norm is not None:
        hidden = config.student_widths[1:]
        chain = tuple(config.student_widths) + (1,)
        n_params = sum((a + 1) * b for a, b in zip(chain[:-1], chain[1:]))
        spec = NetworkClassSpec(
            max_depth=max(len(hidden), 1),
            max_width=max(hidden) if hidden else 1,
            max_nonzero=max(n_params, 1),
            max_abs_weight=config.max_abs_weight,
            max_sup_norm=config.max_sup_norm,
        )
    return TrainConfig(
        hidden_widths=tuple(config.student_widths[1:]),
        epochs=config.epochs,
        eta0=config.eta0,
        restarts=config.restarts,
        seed=seed,
        class_spec=spec,
    )


def run_cell(dist: TeacherDistribution, config: ExperimentConfig, n: int, rep: int) -> Row:
    """Sample, train, and score one (n, rep) cell; re-derivable in isolation."""
    seed = child_seed(config.master_seed, "cell", n, rep)
    t0 = time.perf_counter()
    ds = sample(dist, n, seed)
    try:
        student = hinge_erm(ds, _train_config(config, seed))
    except TrainingDivergedError:
        return Row(n, rep, seed, float("nan"), float("nan"),
                   time.perf_counter() - t0 if config.record_timing else 0.0)
    exact = dist.dim <= 2 if config.risk_mode == "auto" else config.risk_mode == "exact"
    if exact:
        risk, se = excess_risk(dist, student.net, mode="exact"), 0.0
    else:
        risk, se = excess_risk(dist, student.net, mode="mc", samples=config.mc_samples)
    secs = time.perf_counter() - t0 if config.record_timing else 0.0
    return Row(n, rep, seed, float(risk), float(se), round(secs, 6))


_POOL_STATE: dict = {}


def _pool_init(dist, config):
    _POOL_STATE["dist"] = dist
    _POOL_STATE["config"] = config


def _pool_cell(args):
    n, rep = args
    return run_cell(_POOL_STATE["dist"], _POOL_STATE["config"], n, rep)


def run_rate_experiment(config: ExperimentConfig, progress: bool = False) -> RateResult:
    """Run the full (n, rep) sweep and fit the log-log rate slope.

    Cells are independent; with outdir set, rows.csv is written incrementally
    in canonical (n, rep) order and report.json at the end.  Identical
    (config, master_seed) reproduce rows.csv byte-for-byte regardless of the
    worker count.
    """
    t_start = time.perf_counter()
    dist = build_distribution(config)
    cells = [(n, rep) for n in config.n_grid for rep in range(config.reps)]
    workers = config.workers or min(os.cpu_count() or 1, 8)

    outdir = config.outdir
    rows_fh = None
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        rows_fh = open(os.path.join(outdir, "rows.csv"), "w")
        rows_fh.write(ROWS_HEADER + "\n")

    rows: list[Row] = []

    def _emit(row: Row):
        rows.append(row)
        if rows_fh is not None:
            rows_fh.write(row.csv() + "\n")
            rows_fh.flush()
        if progress:
            print(f"  n={row.n} rep={row.rep} excess={row.excess_risk:.3e}", file=sys.stderr)

    if workers > 1 and len(cells) > 1:
        import multiprocessing as mp

        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_pool_init, initargs=(dist, config)) as pool:
            for row in pool.imap(_pool_cell, cells, chunksize=1):
                _emit(row)
    else:
        for n, rep in cells:
            _emit(run_cell(dist, config, n, rep))
    if rows_fh is not None:
        rows_fh.close()

    diverged = tuple((r.n, r.rep) for r in rows if not math.isfinite(r.excess_risk))
    slope, stderr, r2, dropped = _fit_with_drops(rows)
    result = RateResult(rows=tuple(rows), slope=slope, stderr=stderr, r2=r2,
                        dropped_n=dropped, diverged=diverged)
    if outdir is not None:
        report = {
            "config": config.to_dict(),
            "slope": slope,
            "stderr": stderr,
            "r2": r2,
            "dropped_n": list(dropped),
            "diverged": [list(c) for c in diverged],
            "mean_excess_by_n": {
                str(n): float(np.nanmean([r.excess_risk for r in rows if r.n == n]))
                for n in config.n_grid
            },
            "environment": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "platform": platform.platform(),
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            },
            "wall_secs": round(time.perf_counter() - t_start, 3),
        }
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2)
    return result


def _row_table(rows):
    """Normalise row input: Row objects, dicts, or (n, excess) pairs."""
    table = []
    for r in rows:
        if isinstance(r, Row):
            table.append((r.n, r.excess_risk))
        elif isinstance(r, dict):
            table.append((int(r["n"]), float(r["excess_risk"])))
        else:
            table.append((int(r[0]), float(r[1])))
    return table


def fit_rate_slope(rows) -> tuple[float, float, float]:
    """OLS of log(mean excess risk per n) on log n -> (slope, stderr, R^2).

    Means are taken per n (not pooled) so every n weighs equally; n values
    whose mean risk is zero or not finite are dropped with a warning (the
    separable regime saturates at exactly zero for large n).
    """
    slope, stderr, r2, _ = _fit_with_drops(rows)
    return slope, stderr, r2


def _fit_with_drops(rows):
    table = _row_table(rows)
    byn: dict[int, list[float]] = {}
    for n, v in table:
        byn.setdefault(n, []).append(v)
    ns, means, dropped = [], [], []
    for n in sorted(byn):
        vals = [v for v in byn[n] if math.isfinite(v)]
        mean = float(np.mean(vals)) if vals else float("nan")
        if not math.isfinite(mean) or mean <= 0.0:
            dropped.append(n)
            warnings.warn(f"dropping n={n}: mean excess risk {mean} is not positive")
            continue
        ns.append(n)
        means.append(mean)
    if len(ns) < 3:
        raise ValueError(f"need >= 3 distinct n with positive mean risk, have {len(ns)}")
    x = np.log(np.array(ns, dtype=float))
    yv = np.log(np.array(means))
    xb, yb = x.mean(), yv.mean()
    sxx = float(((x - xb) ** 2).sum())
    slope = float(((x - xb) * (yv - yb)).sum() / sxx)
    intercept = yb - slope * xb
    resid = yv - (intercept + slope * x)
    ssr = float((resid ** 2).sum())
    sst = float(((yv - yb) ** 2).sum())
    dof = len(ns) - 2
    stderr = math.sqrt(ssr / dof / sxx) if dof > 0 else float("nan")
    r2 = 0.0 if sst < 1e-30 else 1.0 - ssr / sst
    return slope, stderr, r2, tuple(dropped)


# ---------------------------------------------------------------------------
# noise-condition verification driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class A3Entry:
    seed: int
    c: float
    T: float
    outcome: str  # "pass" | "fail" | "no_active_pieces"
    detail: str = ""


@dataclass(frozen=True)
class A3Report:
    entries: tuple[A3Entry, ...]
    pass_rate: float

    def to_dict(self) -> dict:
        return {
            "pass_rate": self.pass_rate,
            "entries": [dataclasses.asdict(e) for e in self.entries],
        }


def verify_a3_report(
    *,
    teacher_net: NetworkParams | None = None,
    n_seeds: int = 50,
    d: int = 1,
    hidden_widths: tuple[int, ...] = (8,),
    weight_dist: str = "gaussian",
    master_seed: int = 0,
) -> A3Report:
    """Batch-check the analytic noise constants against measured profiles.

    With a teacher net given, checks just that net; otherwise draws n_seeds
    random teachers of the given shape.  Teachers with no boundary or no
    crossing pieces are reported as such, not counted as failures; the pass
    rate is passes / (passes + fails).
    """
    box = Box.unit(d)
    nets = []
    if teacher_net is not None:
        nets.append((0, teacher_net))
    else:
        for s in range(n_seeds):
            seed = child_seed(master_seed, "a3", s)
            nets.append((seed, make_random_teacher([d, *hidden_widths, 1], seed, weight_dist)))
    entries = []
    for seed, raw in nets:
        try:
            dist = normalize_teacher(raw, box)
        except dist_mod.NormalizationError as exc:
            entries.append(A3Entry(seed, float("nan"), float("nan"), "no_active_pieces", str(exc)))
            continue
        try:
            c, T = a3_constants_analytic(dist, verify=True)
        except dist_mod.A3UnverifiableError as exc:
            entries.append(A3Entry(seed, float("nan"), float("nan"), "fail", str(exc)))
            continue
        except dist_mod.A3VerificationError as exc:
            entries.append(A3Entry(seed, float("nan"), float("nan"), "fail", str(exc)))
            continue
        outcome = "pass" if c > 0 else "no_active_pieces"
        entries.append(A3Entry(seed, c, T, outcome))
    passes = sum(e.outcome == "pass" for e in entries)
    fails = sum(e.outcome == "fail" for e in entries)
    rate = passes / (passes + fails) if passes + fails else 1.0
    return A3Report(entries=tuple(entries), pass_rate=rate)
