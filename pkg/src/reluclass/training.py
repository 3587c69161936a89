"""Student fitting: hinge-loss subgradient descent and an exact 1-D 0-1 ERM.

The optimizer is deliberately plain: full-batch subgradient descent with an
inverse-square-root step schedule and a handful of random restarts, keeping
the best iterate seen.  Determinism is part of the contract: (dataset, config)
fixes the result bit-for-bit.

Exact 0-1 minimisation is NP-hard beyond one dimension, so the interval
dynamic program below exists as a d = 1 oracle: it finds the best union of at
most k intervals with breakpoints at sample-gap midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import Dataset
from .network import NetworkClassSpec, NetworkParams, evaluate

__all__ = [
    "TrainConfig",
    "TrainedStudent",
    "TrainingDivergedError",
    "hinge_erm",
    "hinge_risk",
    "hinge_gradient",
    "empirical_01_risk",
    "interval_dp_01_erm",
]


class TrainingDivergedError(RuntimeError):
    """Empirical hinge risk became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for `hinge_erm`.

    hidden_widths sizes the student; class_spec (optional) supplies the B/F
    caps enforced by the projection flags.  eta0 scales the step schedule
    eta_t = eta0 / sqrt(1 + t).  Restart r draws its init from the spawned
    stream (seed, r), uniform on (-1/sqrt(fan_in), +1/sqrt(fan_in)).
    """

    hidden_widths: tuple[int, ...]
    epochs: int = 2000
    eta0: float = 0.1
    restarts: int = 5
    seed: int = 0
    class_spec: NetworkClassSpec | None = None
    clip_weights: bool = True
    rescale_output: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.restarts < 1 or self.eta0 <= 0:
            raise ValueError("epochs >= 0, restarts >= 1, eta0 > 0 required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")


@dataclass(frozen=True)
class TrainedStudent:
    net: NetworkParams
    history: tuple[tuple[float, float], ...]  # (hinge risk, 0-1 risk) per epoch
    final_hinge_risk: float
    final_01_risk: float
    restart: int


def hinge_risk(net: NetworkParams, X, y) -> float:
    z = np.asarray(y) * np.asarray(evaluate(net, X))
    return float(np.maximum(1.0 - z, 0.0).mean())


def empirical_01_risk(net: NetworkParams, dataset_or_X, y=None) -> float:
    """Fraction of sign mismatches; sign(0) counts as +1."""
    if y is None:
        X, y = dataset_or_X.X, dataset_or_X.y
    else:
        X = dataset_or_X
    pred = np.where(np.asarray(evaluate(net, X)) >= 0, 1, -1)
    return float((pred != np.asarray(y)).mean())


def _forward(params, X):
    """Forward pass keeping post-activations; returns (activations, output)."""
    hs = [X]
    h = X
    for w, b in params[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
        hs.append(h)
    w, b = params[-1]
    return hs, (hs[-1] @ w.T + b)[:, 0]


def hinge_gradient(net_or_params, X, y):
    """Mean hinge risk and its subgradient w.r.t. every weight and bias.

    Subgradient conventions: the hinge kink at margin 1 takes the flat side
    (derivative 0), and ReLU at 0 takes 0 (a unit sitting exactly at its kink
    contributes nothing).
    """
    params = net_or_params.layers if isinstance(net_or_params, NetworkParams) else net_or_params
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    risk, _, grads = _risk_and_gradient(params, X, y)
    return risk, grads


def _risk_and_gradient(params, X, y):
    """(hinge risk, 0-1 risk, grads) from a single forward/backward pass."""
    n = len(y)
    hs, f = _forward(params, X)
    z = y * f
    risk = float(np.maximum(1.0 - z, 0.0).mean())
    zero_one = float((np.where(f >= 0, 1.0, -1.0) != y).mean())
    # d(risk)/df, with phi'(z) = -1 strictly left of the kink
    df = (-(z < 1.0).astype(float) * y) / n
    grads = []
    delta = df[:, None]  # (n, width of current layer output)
    for k in range(len(params) - 1, -1, -1):
        w, _ = params[k]
        h_in = hs[k]
        gw = delta.T @ h_in
        gb = delta.sum(axis=0)
        grads.append((gw, gb))
        if k > 0:
            delta = (delta @ w) * (hs[k] > 0.0)
    grads.reverse()
    return risk, zero_one, grads


def _init_params(widths, rng):
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        params.append(
            (rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out))
        )
    return params


def _project(params, spec: NetworkClassSpec | None, clip_w: bool, rescale: bool, probe):
    if spec is None:
        return
    if clip_w:
        for w, b in params:
            np.clip(w, -spec.max_abs_weight, spec.max_abs_weight, out=w)
            np.clip(b, -spec.max_abs_weight, spec.max_abs_weight, out=b)
    if rescale and probe is not None:
        _, f = _forward(params, probe)
        peak = float(np.abs(f).max())
        if peak > spec.max_sup_norm:
            s = spec.max_sup_norm / peak
            w, b = params[-1]
            params[-1] = (w * s, b * s)


def hinge_erm(dataset: Dataset, config: TrainConfig) -> TrainedStudent:
    """Full-batch hinge subgradient descent with restarts; keeps the best iterate.

    The returned net is the lowest-hinge-risk iterate over all restarts and
    steps (so the final risk never exceeds the initial one).  When a class
    spec is present, weights are clipped to B after every step, the output
    scale is checked against F on the batch after every step, and once more
    on a 10^4-point probe grid over the data bounding box at the end.
    """
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=float)
    if len(X) == 0:
        raise ValueError("dataset is empty")
    widths = (X.shape[1],) + tuple(config.hidden_widths) + (1,)

    probe = None
    if config.class_spec is not None and config.rescale_output:
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        from .geometry import Box

        probe = Box(lo - 0.05 * span, hi + 0.05 * span).grid(10_000)

    best = None
    for restart in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(restart,)))
        params = _init_params(widths, rng)
        _project(params, config.class_spec, config.clip_weights, config.rescale_output, X)
        history = []
        best_local = None
        for t in range(config.epochs):
            risk, zero_one, grads = _risk_and_gradient(params, X, y)
            if not math.isfinite(risk):
                raise TrainingDivergedError(f"restart {restart}: risk={risk} at step {t}")
            history.append((risk, zero_one))
            if best_local is None or risk < best_local[0]:
                best_local = (risk, [(w.copy(), b.copy()) for w, b in params])
            eta = config.eta0 / math.sqrt(1.0 + t)
            params = [(w - eta * gw, b - eta * gb) for (w, b), (gw, gb) in zip(params, grads)]
            _project(params, config.class_spec, config.clip_weights, config.rescale_output, X)
        final_risk = hinge_risk_params(params, X, y)
        if not math.isfinite(final_risk):
            raise TrainingDivergedError(f"restart {restart}: final risk={final_risk}")
        if best_local is None or final_risk < best_local[0]:
            best_local = (final_risk, params)
        history.append((final_risk, empirical_01_risk_params(params, X, y)))
        if best is None or best_local[0] < best[0]:
            best = (best_local[0], best_local[1], tuple(history), restart)

    risk, params, history, restart = best
    _project(params, config.class_spec, config.clip_weights, config.rescale_output, probe)
    net = NetworkParams(params)
    return TrainedStudent(
        net=net,
        history=history,
        final_hinge_risk=hinge_risk(net, X, y),
        final_01_risk=empirical_01_risk(net, X, y),
        restart=restart,
    )


def hinge_risk_params(params, X, y) -> float:
    _, f = _forward(params, X)
    return float(np.maximum(1.0 - y * f, 0.0).mean())


def empirical_01_risk_params(params, X, y) -> float:
    _, f = _forward(params, X)
    return float((np.where(f >= 0, 1, -1) != y).mean())


# ---------------------------------------------------------------------------
# exact 1-D 0-1 ERM over unions of <= k intervals
# ---------------------------------------------------------------------------

def interval_dp_01_erm(dataset: Dataset, max_intervals: int,
                       domain: tuple[float, float] = (0.0, 1.0)):
    """Exact empirical 0-1 minimiser over unions of at most k intervals (d = 1).

    Points sharing an x value form an atom that must be labeled together;
    the dynamic program walks the sorted atoms with state (intervals started,
    currently inside) in O(n k).  Returned interval endpoints sit at
    midpoints of sample gaps (or at the domain edges), and the risk is the
    achieved misclassification fraction.
    """
    if max_intervals < 1:
        raise ValueError("max_intervals must be >= 1")
    X, y = np.asarray(dataset.X, dtype=float), np.asarray(dataset.y)
    if X.shape[1] != 1:
        raise ValueError("the interval oracle is d = 1 only")
    xs = X[:, 0]
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], y[order]
    # atoms of identical x
    ax, pos_counts, neg_counts = [], [], []
    i = 0
    while i < len(xs):
        j = i
        while j < len(xs) and xs[j] == xs[i]:
            j += 1
        ax.append(xs[i])
        pos_counts.append(int((ys[i:j] == 1).sum()))
        neg_counts.append(int((ys[i:j] == -1).sum()))
        i = j
    m, k = len(ax), max_intervals

    INF = float("inf")
    # dp[j][s]: best cost with j intervals started, s = currently inside
    dp = [[INF, INF] for _ in range(k + 1)]
    dp[0][0] = 0.0
    parent = []
    for g in range(m):
        step = [[None, None] for _ in range(k + 1)]
        ndp = [[INF, INF] for _ in range(k + 1)]
        for j in range(k + 1):
            for s in (0, 1):
                if dp[j][s] == INF:
                    continue
                # stay / go outside
                cost = dp[j][s] + pos_counts[g]
                if cost < ndp[j][0]:
                    ndp[j][0] = cost
                    step[j][0] = (j, s)
                # be inside: continue the open interval or start a new one
                jj = j if s == 1 else j + 1
                if jj <= k:
                    cost = dp[j][s] + neg_counts[g]
                    if cost < ndp[jj][1]:
                        ndp[jj][1] = cost
                        step[jj][1] = (j, s)
        dp = ndp
        parent.append(step)

    best_cost, best_state = INF, None
    for j in range(k + 1):
        for s in (0, 1):
            if dp[j][s] < best_cost:
                best_cost, best_state = dp[j][s], (j, s)

    # walk back to per-atom inside/outside labels
    labels = []
    state = best_state
    for g in range(m - 1, -1, -1):
        j, s = state
        labels.append(s)
        state = parent[g][j][s]
    labels.reverse()

    lo_dom, hi_dom = float(domain[0]), float(domain[1])
    intervals = []
    g = 0
    while g < m:
        if labels[g] == 1:
            start = g
            while g + 1 < m and labels[g + 1] == 1:
                g += 1
            lo = lo_dom if start == 0 else 0.5 * (ax[start - 1] + ax[start])
            hi = hi_dom if g == m - 1 else 0.5 * (ax[g] + ax[g + 1])
            intervals.append((lo, hi))
        g += 1
    return intervals, best_cost / len(xs)
