"""Explicit ReLU networks: evaluation, size metrics, constructions, serialization.

Networks are stored as dense per-layer (weight, bias) pairs.  The last layer is
affine with a scalar output; every earlier layer is followed by ReLU.  Nets here
are tiny (tens of units), so clarity beats throughput everywhere except
`evaluate`, which is vectorised because training and Monte Carlo integration
hammer it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkParams",
    "NetworkClassSpec",
    "NetworkFormatError",
    "evaluate",
    "size_metrics",
    "make_affine",
    "make_bump_phi",
    "make_psi_j",
    "make_b_omega",
    "make_spike",
    "make_sawtooth",
    "make_random_teacher",
    "serialize",
    "deserialize",
    "to_document",
    "from_document",
]


class NetworkFormatError(ValueError):
    """Malformed network document (bad shapes, broken layer chain, non-finite values)."""


@dataclass(frozen=True)
class NetworkParams:
    """A ReLU network as an ordered list of (weight matrix, bias vector) layers.

    `layers[k] = (W, b)` with `W` of shape (out, in) and `b` of shape (out,).
    The final layer must have scalar output.  Instances are immutable; all
    arrays are copied and write-protected at construction.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __init__(self, layers):
        frozen = []
        for k, (w, b) in enumerate(layers):
            w = np.array(w, dtype=float)
            b = np.array(b, dtype=float)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise NetworkFormatError(f"layer {k}: W must be (out,in), b must be (out,)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NetworkFormatError(f"layer {k}: non-finite parameter")
            w.setflags(write=False)
            b.setflags(write=False)
            frozen.append((w, b))
        if not frozen:
            raise NetworkFormatError("network needs at least one layer")
        for k in range(1, len(frozen)):
            if frozen[k][0].shape[1] != frozen[k - 1][0].shape[0]:
                raise NetworkFormatError(
                    f"layer {k}: input dim {frozen[k][0].shape[1]} does not chain "
                    f"with previous output dim {frozen[k - 1][0].shape[0]}"
                )
        if frozen[-1][0].shape[0] != 1:
            raise NetworkFormatError("final layer must have scalar output")
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers) - 1

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers[:-1])

    @property
    def widths(self) -> tuple[int, ...]:
        """Full width chain (input, hidden..., output)."""
        return (self.input_dim,) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def num_hidden_units(self) -> int:
        return sum(self.hidden_widths)

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            w1.shape == w2.shape and (w1 == w2).all() and (b1 == b2).all()
            for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
        )

    def __hash__(self):
        return hash(tuple((w.tobytes(), b.tobytes()) for w, b in self.layers))


def evaluate(net: NetworkParams, x) -> float | np.ndarray:
    """Evaluate the network at a point (shape (d,)) or a batch (shape (n, d)).

    Returns a scalar for a point, a length-n vector for a batch.  Pure and
    deterministic.  Raises ValueError on dimension mismatch.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"expected points of dim {net.input_dim}, got shape {x.shape}")
    h = x
    for w, b in net.layers[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
    w, b = net.layers[-1]
    out = (h @ w.T + b)[:, 0]
    return float(out[0]) if single else out


def size_metrics(net: NetworkParams) -> tuple[int, int, int, float]:
    """Return (depth, max_width, nonzero_count, max_abs_param).

    depth = number of hidden layers; max_width = widest hidden layer (0 for an
    affine net); nonzero_count counts exactly-zero entries out across all
    weights and biases; max_abs_param is the sup-norm over all parameters.
    """
    widths = net.hidden_widths
    nonzero = 0
    max_abs = 0.0
    for w, b in net.layers:
        nonzero += int(np.count_nonzero(w)) + int(np.count_nonzero(b))
        max_abs = max(max_abs, float(np.abs(w).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    return (net.depth, max(widths) if widths else 0, nonzero, max_abs)


@dataclass(frozen=True)
class NetworkClassSpec:
    """Size budget (L, N, S, B, F) for a family of ReLU networks.

    L bounds the hidden-layer count, N the width, S the nonzero-parameter
    count, B the parameter sup-norm, and F the function sup-norm.  The F check
    needs probe points; for a piecewise-linear net the sup over a box is
    attained at region vertices, so passing a grid plus the piece vertices
    makes the check exact.
    """

    max_depth: int
    max_width: int
    max_nonzero: int
    max_abs_weight: float
    max_sup_norm: float

    def __post_init__(self):
        if min(self.max_depth, self.max_width, self.max_nonzero) < 1:
            raise ValueError("count budgets must be positive")
        if min(self.max_abs_weight, self.max_sup_norm) <= 0:
            raise ValueError("norm budgets must be positive")

    def contains(self, net: NetworkParams, probe_points=None) -> bool:
        depth, width, nonzero, max_abs = size_metrics(net)
        if depth > self.max_depth or width > self.max_width:
            return False
        if nonzero > self.max_nonzero or max_abs > self.max_abs_weight:
            return False
        if probe_points is not None and len(probe_points) > 0:
            sup = float(np.abs(evaluate(net, np.atleast_2d(probe_points))).max())
            if sup > self.max_sup_norm:
                return False
        return True


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

def make_affine(weights, bias: float = 0.0) -> NetworkParams:
    """Affine net x -> w.x + b (zero hidden layers)."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    return NetworkParams([(w.reshape(1, -1), np.array([bias]))])


def make_bump_phi() -> NetworkParams:
    """The unit hat: 1 at 0, linear down to 0 at +-1, zero outside [-1, 1].

    Realised as s(t+1) - 2 s(t) + s(t-1) with one hidden layer of width 3.
    """
    w1 = np.array([[1.0], [1.0], [1.0]])
    b1 = np.array([1.0, 0.0, -1.0])
    w2 = np.array([[1.0, -2.0, 1.0]])
    b2 = np.array([0.0])
    return NetworkParams([(w1, b1), (w2, b2)])


def make_psi_j(M: int, j: int) -> NetworkParams:
    """Bump number j of the scaled family: exp(-M) * hat(M*t - (j-1)).

    Peak exp(-M) at t=(j-1)/M; support [(j-2)/M, j/M].  Requires 1 <= j <= M.
    """
    if not (1 <= j <= M):
        raise ValueError(f"bump index j={j} out of range 1..{M}")
    phi = make_bump_phi()
    (w1, b1), (w2, b2) = phi.layers
    # input substitution t -> M*t - (j-1), output scale exp(-M)
    w1s = w1 * M
    b1s = b1 + w1[:, 0] * (-(j - 1))
    return NetworkParams([(w1s, b1s), (w2 * math.exp(-M), b2 * math.exp(-M))])


def make_b_omega(M: int, omega) -> NetworkParams:
    """Sum of the selected bumps: sum_j omega_j * psi_j(t), one hidden layer.

    omega is a 0/1 vector of length M.  Width is 3 * (number of ones), so O(M).
    An all-zero omega yields the zero affine net.
    """
    omega = [int(o) for o in omega]
    if len(omega) != M:
        raise ValueError(f"omega must have length M={M}")
    if any(o not in (0, 1) for o in omega):
        raise ValueError("omega entries must be 0 or 1")
    selected = [j for j in range(1, M + 1) if omega[j - 1]]
    if not selected:
        return make_affine([0.0], 0.0)
    rows_w, rows_b, out_w = [], [], []
    for j in selected:
        (w1, b1), (w2, _) = make_psi_j(M, j).layers
        rows_w.append(w1)
        rows_b.append(b1)
        out_w.append(w2)
    w1 = np.vstack(rows_w)
    b1 = np.concatenate(rows_b)
    w2 = np.hstack(out_w)
    return NetworkParams([(w1, b1), (w2, np.array([0.0]))])


def make_spike(d: int) -> NetworkParams:
    """L1 pyramid on d-1 input coordinates: max(0, 1 - sum_i |u_i|).

    Value 1 at the origin, zero outside [-1,1]^(d-1), range [0,1].  Two hidden
    layers; |u_i| is built from s(u_i) + s(-u_i), so the nonzero-weight count
    is 4(d-1) + 2 = O(d), inside the O(d^2) budget.  Requires d >= 2; at d=2
    this is exactly the 1-D hat.
    """
    if d < 2:
        raise ValueError("spike needs d >= 2 (input dimension d-1 >= 1)")
    k = d - 1
    w1 = np.zeros((2 * k, k))
    for i in range(k):
        w1[2 * i, i] = 1.0
        w1[2 * i + 1, i] = -1.0
    b1 = np.zeros(2 * k)
    w2 = -np.ones((1, 2 * k))
    b2 = np.array([1.0])
    w3 = np.array([[1.0]])
    b3 = np.array([0.0])
    return NetworkParams([(w1, b1), (w2, b2), (w3, b3)])


def make_sawtooth(depth: int) -> NetworkParams:
    """Depth-fold composition of the tent map, width 2 per hidden layer.

    On [0, 1] the returned net oscillates with 2^depth linear pieces, which
    witnesses the exponential-in-depth piece growth of narrow deep nets.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    # tent(t) = 2 s(t) - 4 s(t - 1/2); layer l feeds the tent value onward
    layers = [(np.array([[1.0], [1.0]]), np.array([0.0, -0.5]))]
    for _ in range(depth - 1):
        layers.append((np.array([[2.0, -4.0], [2.0, -4.0]]), np.array([0.0, -0.5])))
    layers.append((np.array([[2.0, -4.0]]), np.array([0.0])))
    return NetworkParams(layers)


def make_random_teacher(widths, seed: int, weight_dist: str = "gaussian") -> NetworkParams:
    """Random net with i.i.d. continuous weights, deterministic given seed.

    `widths` is the full chain (input, hidden..., 1); `[d, 1]` gives an affine
    teacher.  Supported distributions: "gaussian" (standard normal) and
    "uniform" (uniform on (-1, 1)); both are continuous, which is what makes
    the noise-condition certificate hold with high probability.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2 or widths[-1] != 1 or min(widths) < 1:
        raise ValueError(f"widths must be a chain (d, ..., 1) of positive ints, got {widths}")
    rng = np.random.default_rng(seed)
    if weight_dist == "gaussian":
        draw = rng.standard_normal
    elif weight_dist == "uniform":
        draw = lambda size: rng.uniform(-1.0, 1.0, size)
    else:
        raise ValueError(f"unknown weight_dist {weight_dist!r}")
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        layers.append((draw((fan_out, fan_in)), draw((fan_out,))))
    return NetworkParams(layers)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
# Document format: {"layers": [{"w": [[...]], "b": [...]}, ...]} with the final
# layer scalar-output.  Field order is fixed (w before b) for diffability, and
# floats round-trip bit-exactly through repr.

def to_document(net: NetworkParams) -> dict:
    return {"layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in net.layers]}


def from_document(doc: dict) -> NetworkParams:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkFormatError("document must be an object with a 'layers' list")
    layers = doc["layers"]
    if not isinstance(layers, list) or not layers:
        raise NetworkFormatError("'layers' must be a non-empty list")
    parsed = []
    for k, layer in enumerate(layers):
        if not isinstance(layer, dict) or "w" not in layer or "b" not in layer:
            raise NetworkFormatError(f"layer {k}: expected object with 'w' and 'b'")
        try:
            w = np.array(layer["w"], dtype=float)
            b = np.array(layer["b"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"layer {k}: non-numeric entries") from exc
        parsed.append((w, b))
    return NetworkParams(parsed)  # shape/chain/finiteness checks live there


def serialize(net: NetworkParams) -> str:
    return json.dumps(to_document(net), allow_nan=False)


def deserialize(text: str) -> NetworkParams:
    def _reject_constant(name):
        raise NetworkFormatError(f"non-finite value {name} in document")

    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    return from_document(doc)
