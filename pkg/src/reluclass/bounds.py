"""Closed-form region-count and entropy bounds, in exact integer arithmetic.

Counting bounds (region counts, active-piece budgets) are exact big integers;
entropy/covering bounds are order bounds reported with constant 1 and labelled
as such, so callers never mistake them for measured quantities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

__all__ = [
    "Architecture",
    "BoundReport",
    "serra_upper_bound",
    "montufar_lower_bound",
    "active_piece_budget",
    "polyhedron_bracketing_bound",
    "g_class_entropy_bound",
    "covering_number_bound",
]


@dataclass(frozen=True)
class Architecture:
    """Input dimension plus hidden-layer widths."""

    input_dim: int
    hidden_widths: tuple[int, ...]

    def __init__(self, input_dim, hidden_widths):
        if int(input_dim) < 1:
            raise ValueError("input_dim must be >= 1")
        widths = tuple(int(w) for w in hidden_widths)
        if any(w < 0 for w in widths):
            raise ValueError("hidden widths must be >= 0")
        object.__setattr__(self, "input_dim", int(input_dim))
        object.__setattr__(self, "hidden_widths", widths)

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)


@dataclass(frozen=True)
class BoundReport:
    """Named bound value with its inputs echoed back.

    kind is "exact count" for integer counting bounds and "order bound" for
    entropy-style formulas evaluated with constant 1.
    """

    name: str
    inputs: dict
    value: int | float
    kind: str
    formula: str
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "inputs": self.inputs,
            "value": self.value,
            "kind": self.kind,
            "formula": self.formula,
        }
        if self.extras:
            payload["extras"] = self.extras
        return json.dumps(payload, allow_nan=False)


def serra_upper_bound(arch: Architecture) -> int:
    """Exact value of the activation-region upper bound for a ReLU net.

    Sums prod_l C(n_l, j_l) over all index tuples with
    0 <= j_l <= min(n_0, n_1 - j_1, ..., n_{l-1} - j_{l-1}, n_l).
    Depth-first with memoisation on (layer, remaining cap); the running cap
    is what the chained min constraint reduces to.
    """
    widths = arch.hidden_widths
    n0 = arch.input_dim

    @lru_cache(maxsize=None)
    def rec(level: int, cap: int) -> int:
        if level == len(widths):
            return 1
        n = widths[level]
        total = 0
        for j in range(min(cap, n) + 1):
            total += math.comb(n, j) * rec(level + 1, min(cap, n - j))
        return total

    return rec(0, n0)


def montufar_lower_bound(arch: Architecture) -> int:
    """Exact value of the constructive region-count lower bound.

    (prod_{l<L} floor(n_l / n_0)^{n_0}) * sum_{j<=n_0} C(n_L, j); requires
    every hidden width >= n_0.
    """
    n0 = arch.input_dim
    widths = arch.hidden_widths
    if not widths:
        return 1
    if any(w < n0 for w in widths):
        raise ValueError(f"lower bound needs every hidden width >= input dim {n0}, got {widths}")
    prod = 1
    for w in widths[:-1]:
        prod *= (w // n0) ** n0
    return prod * sum(math.comb(widths[-1], j) for j in range(n0 + 1))


def active_piece_budget(arch: Architecture) -> int:
    """Capacity budget for boundary-crossing pieces a student of this shape can match.

    Same product-times-sum shape as the constructive lower bound but without
    the width hypothesis: floors may kill the product.
    """
    d = arch.input_dim
    widths = arch.hidden_widths
    if not widths:
        return 1
    prod = 1
    for w in widths[:-1]:
        prod *= (w // d) ** d
    return prod * sum(math.comb(widths[-1], j) for j in range(d + 1))


def polyhedron_bracketing_bound(d: int, S: int, delta: float) -> float:
    """Order bound on the bracketing entropy of polyhedra with at most S vertices.

    d^2 * S * log(d^(3/2) * S / delta), constant 1.  Requires delta in (0, 1).
    """
    if not (0 < delta < 1):
        raise ValueError("delta must be in (0, 1)")
    if S < 1 or d < 1:
        raise ValueError("need S >= 1 and d >= 1")
    return d * d * S * math.log(d ** 1.5 * S / delta)


def g_class_entropy_bound(N: int, L: int, d: int, delta: float) -> tuple[float, float]:
    """Order bound on the bracketing entropy of ReLU decision regions.

    Returns (bound, log_coefficient) where
    bound = N^(L d^2) * d^3 * max(L d^2 log N, log(1/delta)) and
    log_coefficient = N^(L d^2) * d^3 * L d^2 is the multiplier of log(1/delta)
    in the small-delta regime.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if not (0 < delta < 1):
        raise ValueError("delta must be in (0, 1)")
    lead = N ** (L * d * d) * d ** 3
    bound = lead * max(L * d * d * math.log(N), math.log(1.0 / delta))
    return bound, float(lead * L * d * d)


def covering_number_bound(L: int, N: int, S: int, B: float, delta: float) -> float:
    """Sup-norm covering bound for the size-constrained net class.

    2 L (S+1) * log((L+1)(N+1) max(B,1) / delta).  Requires delta > 0.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    return 2.0 * L * (S + 1) * math.log((L + 1) * (N + 1) * max(B, 1.0) / delta)


# ---------------------------------------------------------------------------
# report constructors for the CLI
# ---------------------------------------------------------------------------

def serra_report(input_dim, hidden_widths) -> BoundReport:
    arch = Architecture(input_dim, hidden_widths)
    return BoundReport(
        name="regions_upper",
        inputs={"input_dim": arch.input_dim, "hidden_widths": list(arch.hidden_widths)},
        value=serra_upper_bound(arch),
        kind="exact count",
        formula="sum over admissible (j_1..j_L) of prod_l C(n_l, j_l)",
    )


def montufar_report(input_dim, hidden_widths) -> BoundReport:
    arch = Architecture(input_dim, hidden_widths)
    return BoundReport(
        name="regions_lower",
        inputs={"input_dim": arch.input_dim, "hidden_widths": list(arch.hidden_widths)},
        value=montufar_lower_bound(arch),
        kind="exact count",
        formula="prod_{l<L} floor(n_l/n_0)^n_0 * sum_{j<=n_0} C(n_L, j)",
    )


def active_report(input_dim, hidden_widths) -> BoundReport:
    arch = Architecture(input_dim, hidden_widths)
    return BoundReport(
        name="active_piece_budget",
        inputs={"input_dim": arch.input_dim, "hidden_widths": list(arch.hidden_widths)},
        value=active_piece_budget(arch),
        kind="exact count",
        formula="prod_{l<L} floor(n_l/d)^d * sum_{j<=d} C(n_L, j)",
    )


def bracketing_report(d, S, delta) -> BoundReport:
    return BoundReport(
        name="polyhedron_bracketing",
        inputs={"d": d, "S": S, "delta": delta},
        value=polyhedron_bracketing_bound(d, S, delta),
        kind="order bound",
        formula="d^2 S log(d^(3/2) S / delta)",
    )


def gclass_report(N, L, d, delta) -> BoundReport:
    value, coeff = g_class_entropy_bound(N, L, d, delta)
    return BoundReport(
        name="decision_region_entropy",
        inputs={"N": N, "L": L, "d": d, "delta": delta},
        value=value,
        kind="order bound",
        formula="N^(L d^2) d^3 max(L d^2 log N, log(1/delta))",
        extras={"log_coefficient": coeff},
    )


def covering_report(L, N, S, B, delta) -> BoundReport:
    return BoundReport(
        name="sup_norm_covering",
        inputs={"L": L, "N": N, "S": S, "B": B, "delta": delta},
        value=covering_number_bound(L, N, S, B, delta),
        kind="order bound",
        formula="2 L (S+1) log((L+1)(N+1) max(B,1) / delta)",
    )
