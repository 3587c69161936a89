"""Teacher networks as labeled-data distributions, noise profiles, and risks.

An overlap distribution places mass on the whole box: the class densities are
p = 1 + g/2 and q = 1 - g/2 for a teacher g normalised to mean zero and sup
norm 2 - eps, so the marginal of x is uniform and the label-1 probability is
eta(x) = 1/2 + g(x)/4.  A separable distribution keeps only the points with
|g| > tau and labels them by sign, so the two class supports are disjoint.

Everything that can be exact at d <= 2 is exact: integrals of |g| reduce to
integrals of an affine function over convex pieces of the region overlay.
Higher dimensions fall back to scrambled-Sobol quasi Monte Carlo.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Box,
    Polytope,
    RegionDecomposition,
    clip_polytope,
    decision_region,
    enumerate_regions,
    integrate_affine,
    intersect_polytopes,
    volume,
)
from .network import NetworkParams, evaluate, from_document, to_document

__all__ = [
    "TeacherDistribution",
    "NoiseProfile",
    "Dataset",
    "LowerBoundFamily",
    "NormalizationError",
    "MarginTooLargeError",
    "A3UnverifiableError",
    "A3VerificationError",
    "normalize_teacher",
    "separable",
    "sample",
    "noise_profile",
    "a3_constants_analytic",
    "excess_risk",
    "d_pq",
    "lower_bound_densities",
    "load_distribution_spec",
]

DEFAULT_EPS = 0.1
MC_SAMPLES = 1 << 20


class NormalizationError(ValueError):
    """Teacher cannot define a distribution (e.g. constant on the box)."""


class MarginTooLargeError(RuntimeError):
    """Separable rejection sampler accepted less than 1% of proposals."""


class A3UnverifiableError(RuntimeError):
    """The slope recipe for the noise constants does not apply to this teacher."""


class A3VerificationError(RuntimeError):
    """Analytic (c, T) failed the hard check against the measured profile."""


@dataclass(frozen=True)
class Dataset:
    """Labeled sample: X is (n, d), y is (n,) with values in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def to_csv(self, path) -> None:
        d = self.dim
        with open(path, "w") as fh:
            fh.write(",".join(f"x_{i + 1}" for i in range(d)) + ",y\n")
            for row, label in zip(self.X, self.y):
                fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header[-1] != "y" or not all(h.startswith("x_") for h in header[:-1]):
                raise ValueError(f"unexpected dataset header {header}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        X = np.array([[float(v) for v in r[:-1]] for r in rows])
        y = np.array([int(r[-1]) for r in rows])
        if not set(np.unique(y)) <= {-1, 1}:
            raise ValueError("labels must be -1 or +1")
        return cls(X, y)


@dataclass(frozen=True)
class TeacherDistribution:
    """A normalised teacher g together with the distribution it induces.

    mode is "overlap" or "separable"; for separable mode `tau` is the margin
    and (vol_pos, vol_neg) the Lebesgue measures of the two class supports.
    The region decomposition of g is cached (exact at d <= 2).
    """

    net: NetworkParams
    box: Box
    mode: str
    eps: float
    sup_norm: float
    decomp: RegionDecomposition | None
    tau: float | None = None
    vol_pos: float | None = None
    vol_neg: float | None = None

    @property
    def dim(self) -> int:
        return self.box.dim

    def g(self, x) -> np.ndarray | float:
        return evaluate(self.net, x)

    def eta(self, x):
        """P(y = +1 | x).  Overlap: 1/2 + g/4; separable: sign indicator."""
        if self.mode == "overlap":
            return 0.5 + np.asarray(self.g(x)) / 4.0
        return (np.asarray(self.g(x)) > 0).astype(float)

    def bayes_region(self) -> list[Polytope]:
        if self.decomp is None:
            raise ValueError("no cached decomposition (d > 4)")
        return decision_region(self.decomp)

    def density_diff_weight(self, x) -> np.ndarray:
        """|p - q| at x (the integrand of the set distance)."""
        g = np.atleast_1d(np.asarray(self.g(x), dtype=float))
        if self.mode == "overlap":
            return np.abs(g)
        w = np.zeros_like(g)
        w[g > self.tau] = 1.0 / self.vol_pos
        w[g < -self.tau] = 1.0 / self.vol_neg
        return w


def _teacher_decomp(net: NetworkParams, box: Box) -> RegionDecomposition | None:
    if box.dim <= 2:
        return enumerate_regions(net, box, exact=True)
    if box.dim <= 4:
        return enumerate_regions(net, box, exact=False)
    return None


def _mean_over_box(net: NetworkParams, box: Box, decomp) -> float:
    if box.dim <= 2:
        total = sum(
            integrate_affine(r.cell, r.gradient, r.offset) for r in decomp.regions
        )
        return total / box.volume
    pts = box.grid(MC_SAMPLES)
    return float(np.mean(evaluate(net, pts)))


def _sup_over_box(net: NetworkParams, box: Box, decomp) -> float:
    if decomp is not None:
        # piecewise linear: the sup over the box sits at a cell vertex
        sup = 0.0
        for r in decomp.regions:
            vals = r.cell.vertices @ r.gradient + r.offset
            sup = max(sup, float(np.abs(vals).max()))
        return sup
    pts = box.grid(MC_SAMPLES)
    return float(np.abs(evaluate(net, pts)).max())


def normalize_teacher(raw_net: NetworkParams, box: Box, eps: float = DEFAULT_EPS) -> TeacherDistribution:
    """Shift and scale a raw net into a valid overlap teacher.

    The output bias is shifted so the box integral of g vanishes (making
    p = 1 + g/2 and q = 1 - g/2 integrate to one over a unit-volume domain,
    and proportionally otherwise), then the output layer is scaled so the sup
    norm equals 2 - eps.  The shift happens before the scaling, so the
    decision set of the result is the shifted net's.  Constant nets have no
    decision boundary and are rejected.
    """
    if not (0 < eps < 2):
        raise ValueError("eps must be in (0, 2)")
    decomp = _teacher_decomp(raw_net, box)
    mean = _mean_over_box(raw_net, box, decomp)

    layers = list(raw_net.layers)
    w_last, b_last = layers[-1]
    layers[-1] = (w_last, b_last - mean)
    shifted = NetworkParams(layers)
    shifted_decomp = (
        None
        if decomp is None
        else RegionDecomposition(
            net=shifted,
            box=box,
            regions=tuple(
                type(r)(r.pattern, r.gradient, r.offset - mean, r.cell) for r in decomp.regions
            ),
            exact=decomp.exact,
        )
    )
    sup = _sup_over_box(shifted, box, shifted_decomp)
    if sup < 1e-12:
        raise NormalizationError("teacher is constant on the box: no decision boundary")
    scale = (2.0 - eps) / sup
    layers = list(shifted.layers)
    w_last, b_last = layers[-1]
    layers[-1] = (w_last * scale, b_last * scale)
    net = NetworkParams(layers)
    final_decomp = (
        None
        if shifted_decomp is None
        else RegionDecomposition(
            net=net,
            box=box,
            regions=tuple(
                type(r)(r.pattern, r.gradient * scale, r.offset * scale, r.cell)
                for r in shifted_decomp.regions
            ),
            exact=shifted_decomp.exact,
        )
    )
    return TeacherDistribution(
        net=net, box=box, mode="overlap", eps=eps, sup_norm=2.0 - eps, decomp=final_decomp
    )


def separable(dist: TeacherDistribution, tau: float | None = None) -> TeacherDistribution:
    """Separable variant of an overlap teacher: keep |g| > tau, label by sign."""
    if dist.mode != "overlap":
        raise ValueError("expected an overlap distribution")
    if tau is None:
        tau = 0.1 * dist.sup_norm
    if tau <= 0:
        raise ValueError("margin tau must be positive")
    vol_pos, vol_neg = _margin_volumes(dist, tau)
    if (vol_pos + vol_neg) < 0.01 * dist.box.volume:
        raise MarginTooLargeError(
            f"margin tau={tau} keeps {(vol_pos + vol_neg) / dist.box.volume:.2%} of the box"
        )
    if min(vol_pos, vol_neg) <= 0:
        raise MarginTooLargeError(f"one class support is empty at tau={tau}")
    return TeacherDistribution(
        net=dist.net,
        box=dist.box,
        mode="separable",
        eps=dist.eps,
        sup_norm=dist.sup_norm,
        decomp=dist.decomp,
        tau=tau,
        vol_pos=vol_pos,
        vol_neg=vol_neg,
    )


def _margin_volumes(dist: TeacherDistribution, tau: float) -> tuple[float, float]:
    if dist.dim <= 2:
        vol_pos = vol_neg = 0.0
        for r in dist.decomp.regions:
            up = clip_polytope(r.cell, r.gradient, r.offset - tau)  # g >= tau
            if up is not None:
                vol_pos += volume(up)
            dn = clip_polytope(r.cell, -r.gradient, -r.offset - tau)  # g <= -tau
            if dn is not None:
                vol_neg += volume(dn)
        return vol_pos, vol_neg
    pts = dist.box.grid(MC_SAMPLES)
    g = np.asarray(dist.g(pts))
    scale = dist.box.volume / len(pts)
    return float((g > tau).sum() * scale), float((g < -tau).sum() * scale)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _rng(seed: int, batch: int):
    """Counter-based generator: (seed, batch) fully determines the stream."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(batch),)))
    )


def sample(dist: TeacherDistribution, n: int, seed: int, batch: int = 0) -> Dataset:
    """Draw n labeled points; deterministic given (dist, n, seed, batch).

    Overlap: x uniform on the box, y = +1 with probability eta(x).
    Separable: y is a fair coin, then x is rejection-sampled uniformly from
    the matching class support {g > tau} / {g < -tau}; errors out if fewer
    than 1% of proposals land in the supports.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed, batch)
    if dist.mode == "overlap":
        X = dist.box.sample(n, rng)
        u = rng.random(n)
        y = np.where(u < dist.eta(X), 1, -1)
        return Dataset(X, y)

    y = np.where(rng.random(n) < 0.5, 1, -1)
    X = np.empty((n, dist.dim))
    slots = {+1: np.where(y > 0)[0], -1: np.where(y < 0)[0]}
    filled = {+1: 0, -1: 0}
    proposed = accepted = 0
    while filled[+1] < len(slots[+1]) or filled[-1] < len(slots[-1]):
        remaining = sum(len(slots[s]) - filled[s] for s in (+1, -1))
        chunk = max(2 * remaining, 1024)
        P = dist.box.sample(chunk, rng)
        g = np.asarray(dist.g(P))
        proposed += chunk
        for sgn, keep in ((+1, g > dist.tau), (-1, g < -dist.tau)):
            hits = P[keep]
            take = min(len(hits), len(slots[sgn]) - filled[sgn])
            if take:
                X[slots[sgn][filled[sgn] : filled[sgn] + take]] = hits[:take]
                filled[sgn] += take
                accepted += take
        if proposed >= 200 * n and accepted < 0.01 * proposed:
            raise MarginTooLargeError(
                f"separable rejection rate {1 - accepted / proposed:.2%} exceeds 99%"
            )
    return Dataset(X, y)


# ---------------------------------------------------------------------------
# noise profile and analytic constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseProfile:
    """Measured noise curve t -> Q{|g| <= t} with fitted (c, T).

    kappa is 1 for overlap teachers and math.inf for separable ones.  c is the
    max of measured(t)/t over grid points up to T; T is the saturation onset
    (the first t where the curve reaches the full box volume) capped by the
    caller's t_cap.  se holds per-point standard errors in MC mode.
    """

    kappa: float
    c: float
    T: float
    curve: tuple[tuple[float, float], ...]
    se: tuple[float, ...] | None = None


def _measure_small_g(dist: TeacherDistribution, t: float) -> float:
    """Q{x in box: |g(x)| <= t}, exact at d <= 2."""
    total = 0.0
    for r in dist.decomp.regions:
        piece = clip_polytope(r.cell, -r.gradient, t - r.offset)  # g <= t
        if piece is None:
            continue
        piece = clip_polytope(piece, r.gradient, t + r.offset)  # g >= -t
        if piece is None:
            continue
        total += volume(piece)
    return total


def noise_profile(dist: TeacherDistribution, t_grid, t_cap: float | None = None) -> NoiseProfile:
    """Measure the concentration of g near zero along a grid of thresholds."""
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(t <= 0 for t in t_grid) or sorted(t_grid) != t_grid:
        raise ValueError("t_grid must be positive and ascending")
    vol_box = dist.box.volume
    ses = None
    if dist.dim <= 2:
        measured = [_measure_small_g(dist, t) for t in t_grid]
    else:
        pts = dist.box.grid(MC_SAMPLES)
        absg = np.abs(np.asarray(dist.g(pts)))
        measured, ses = [], []
        for t in t_grid:
            p = float((absg <= t).mean())
            measured.append(p * vol_box)
            ses.append(math.sqrt(max(p * (1 - p), 0.0) / len(pts)) * vol_box)
    cap = t_cap if t_cap is not None else math.inf
    sat = next((t for t, m in zip(t_grid, measured) if m >= vol_box * (1 - 1e-12)), t_grid[-1])
    T = min(sat, cap)
    ratios = [m / t for t, m in zip(t_grid, measured) if t <= T]
    c = max(ratios) if ratios else 0.0
    kappa = math.inf if dist.mode == "separable" else 1.0
    return NoiseProfile(
        kappa=kappa,
        c=c,
        T=T,
        curve=tuple(zip(t_grid, measured)),
        se=None if ses is None else tuple(ses),
    )


def a3_constants_analytic(dist: TeacherDistribution, verify: bool = True,
                          n_check: int = 64) -> tuple[float, float]:
    """Noise constants (c, T) from the teacher's region geometry.

    On each zero-crossing piece, k_i is the smallest coordinate-wise gradient
    magnitude; the set {|g| <= t} meets that piece in a slab of measure at
    most 2 t / k_i (times the box cross-section), so
    c = 2 * s_active * maxproj / min k_i works for every t below
    T = min |g| over piece vertices with |g| > 0 (below T the non-crossing
    pieces contribute nothing).  With verify=True the pair is hard-checked
    against the measured profile on an n_check-point grid.

    Raises A3UnverifiableError when a crossing piece has a zero gradient
    component (the slab bound degenerates), A3VerificationError when the
    check fails.  A constant-sign teacher returns the c = 0 convention.
    """
    if dist.decomp is None:
        raise ValueError("analytic constants need a region decomposition (d <= 4)")
    sides = np.array(dist.box.hi) - np.array(dist.box.lo)
    maxproj = max(float(np.prod(sides) / s) for s in sides)

    kmins, t0 = [], math.inf
    for r in dist.decomp.regions:
        vals = r.cell.vertices @ r.gradient + r.offset
        nonzero = np.abs(vals)[np.abs(vals) > 1e-12]
        if len(nonzero):
            t0 = min(t0, float(nonzero.min()))
        if vals.min() < -1e-12 and vals.max() > 1e-12:
            kmins.append(float(np.abs(r.gradient).min()))
    if not math.isfinite(t0):
        raise A3UnverifiableError("g vanishes at every piece vertex")
    if not kmins:
        c, T = 0.0, t0
    else:
        kmin = min(kmins)
        if kmin <= 1e-12:
            raise A3UnverifiableError(
                "an active piece has a zero gradient component; the slab bound degenerates"
            )
        c = 2.0 * len(kmins) * maxproj / kmin
        T = t0
    if verify:
        grid = [T * (i + 1) / n_check for i in range(n_check)]
        prof = noise_profile(dist, grid, t_cap=T)
        for t, m in prof.curve:
            if m > c * t * (1 + 1e-9) + 1e-12:
                raise A3VerificationError(
                    f"measured Q{{|g|<=t}}={m:.6g} exceeds c*t={c * t:.6g} at t={t:.6g}"
                )
    return c, T


# ---------------------------------------------------------------------------
# set distances and excess risk
# ---------------------------------------------------------------------------

def _integrate_weight_over_piece(dist: TeacherDistribution, piece: Polytope,
                                 grad, off: float) -> float:
    """Integral of |p - q| over a convex piece on which g = grad.x + off."""
    if dist.mode == "overlap":
        total = 0.0
        pos = clip_polytope(piece, grad, off)
        if pos is not None:
            total += integrate_affine(pos, grad, off)
        neg = clip_polytope(piece, -np.asarray(grad), -off)
        if neg is not None:
            total += -integrate_affine(neg, grad, off)
        return total
    total = 0.0
    up = clip_polytope(piece, grad, off - dist.tau)
    if up is not None:
        total += volume(up) / dist.vol_pos
    dn = clip_polytope(piece, -np.asarray(grad), -off - dist.tau)
    if dn is not None:
        total += volume(dn) / dist.vol_neg
    return total


def _integrate_weight(dist: TeacherDistribution, polys: list[Polytope]) -> float:
    total = 0.0
    for poly in polys:
        for r in dist.decomp.regions:
            piece = intersect_polytopes(poly, r.cell)
            if piece is not None:
                total += _integrate_weight_over_piece(dist, piece, r.gradient, r.offset)
    return total


def d_pq(dist: TeacherDistribution, regionsA: list[Polytope], regionsB: list[Polytope],
         mode: str = "auto", samples: int = MC_SAMPLES, seed: int = 0):
    """Density-weighted symmetric difference of two region unions.

    Exact overlay integration at d <= 2; Sobol MC (returning (estimate, se))
    otherwise.  Pieces within each argument must have disjoint interiors.
    """
    exact = dist.dim <= 2 if mode == "auto" else mode == "exact"
    if exact:
        if dist.dim > 2:
            raise ValueError("exact mode supports d <= 2")
        wa = _integrate_weight(dist, regionsA)
        wb = _integrate_weight(dist, regionsB)
        inter = []
        for p in regionsA:
            for q in regionsB:
                piece = intersect_polytopes(p, q)
                if piece is not None:
                    inter.append(piece)
        wab = _integrate_weight(dist, inter)
        return wa + wb - 2.0 * wab
    pts = dist.box.grid(samples)
    in_a = np.zeros(len(pts), dtype=bool)
    for p in regionsA:
        in_a |= p.contains(pts)
    in_b = np.zeros(len(pts), dtype=bool)
    for q in regionsB:
        in_b |= q.contains(pts)
    w = dist.density_diff_weight(pts) * (in_a ^ in_b)
    return _mc_mean(w, dist.box.volume)


def _mc_mean(values: np.ndarray, scale: float, blocks: int = 16) -> tuple[float, float]:
    est = float(values.mean()) * scale
    m = len(values) // blocks
    if m == 0:
        return est, float("nan")
    bmeans = values[: m * blocks].reshape(blocks, m).mean(axis=1) * scale
    se = float(bmeans.std(ddof=1) / math.sqrt(blocks))
    return est, se


def excess_risk(dist: TeacherDistribution, student_net: NetworkParams,
                mode: str = "auto", samples: int = MC_SAMPLES):
    """Population 0-1 risk of sign(student) minus the Bayes risk.

    Equals half the density-weighted measure of the region where the student
    sign disagrees with the teacher sign.  Exact at d <= 2 by overlaying the
    student's linear regions with the teacher's; quasi-Monte-Carlo (returning
    (estimate, se)) at d >= 3.  Always nonnegative.
    """
    if student_net.input_dim != dist.dim:
        raise ValueError("student input dim does not match the distribution")
    exact = dist.dim <= 2 if mode == "auto" else mode == "exact"
    if exact:
        if dist.dim > 2:
            raise ValueError("exact mode supports d <= 2")
        sdec = enumerate_regions(student_net, dist.box, exact=False)
        total = 0.0
        for s in sdec.regions:
            for r in dist.decomp.regions:
                cell = intersect_polytopes(s.cell, r.cell)
                if cell is None:
                    continue
                # student-positive but teacher-negative
                sp = clip_polytope(cell, s.gradient, s.offset)
                if sp is not None:
                    piece = clip_polytope(sp, -r.gradient, -r.offset)
                    if piece is not None:
                        total += _weight_one_sign(dist, piece, r, positive=False)
                # student-negative but teacher-positive
                sn = clip_polytope(cell, -s.gradient, -s.offset)
                if sn is not None:
                    piece = clip_polytope(sn, r.gradient, r.offset)
                    if piece is not None:
                        total += _weight_one_sign(dist, piece, r, positive=True)
        return max(total / 2.0, 0.0)
    pts = dist.box.grid(samples)
    f = np.asarray(evaluate(student_net, pts))
    g = np.asarray(dist.g(pts))
    mismatch = (f >= 0) != (g >= 0)
    w = dist.density_diff_weight(pts) * mismatch
    est, se = _mc_mean(w, dist.box.volume)
    return max(est / 2.0, 0.0), se


def _weight_one_sign(dist, piece, region, positive: bool) -> float:
    """Integral of |p - q| over a piece where sign(g) is known."""
    sgn = 1.0 if positive else -1.0
    if dist.mode == "overlap":
        return sgn * integrate_affine(piece, region.gradient, region.offset)
    clipped = clip_polytope(piece, sgn * region.gradient, sgn * region.offset - dist.tau)
    if clipped is None:
        return 0.0
    return volume(clipped) / (dist.vol_pos if positive else dist.vol_neg)


# ---------------------------------------------------------------------------
# lower-bound density family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundFamily:
    """The two-density family whose members differ by a comb of tiny bumps.

    q0 is piecewise constant in the last coordinate; p_omega adds a bump term
    of height ~exp(-M) over the strip 1/2 <= x_d <= 1/2 + b_omega(x_{-d}) and
    subtracts the constant b3(omega) above it so both integrate to one.  The
    Bayes set is {x : x_d <= 1/2 + b_omega(x_{-d})}.
    """

    M: int
    omega: tuple[int, ...]
    kappa: float
    d: int
    eta0: float
    c2: float
    b1: float
    b2: float
    b3: float
    bump_integral: float

    @property
    def band(self) -> float:
        return math.exp(-self.M)

    def b_omega(self, u) -> np.ndarray:
        """Bump comb on [0,1]^(d-1): sum of scaled L1 pyramids at the lattice."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        k = self.d - 1
        out = np.zeros(len(u))
        shape = (self.M,) * k
        for flat, bit in enumerate(self.omega):
            if not bit:
                continue
            j = np.unravel_index(flat, shape)
            center = (np.array(j, dtype=float)) / self.M  # (j-1)/M with 0-based j
            z = self.M * (u - center)
            out += np.maximum(0.0, 1.0 - np.abs(z).sum(axis=1))
        return self.band * out

    def q0(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xd = x[:, -1]
        lowv = 1.0 - self.eta0 - self.b1
        hiv = 1.0 + self.eta0 + self.b2
        out = np.where(xd < 0.5, lowv, np.where(xd < 0.5 + self.band, 1.0, hiv))
        return out

    def p_omega(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xd = x[:, -1]
        b = self.b_omega(x[:, :-1])
        out = np.ones(len(x))
        in_strip = (xd >= 0.5) & (xd <= 0.5 + b)
        bump = np.zeros(len(x))
        v = 0.5 + self.band - xd
        bump[in_strip] = (np.maximum(v[in_strip], 0.0) / self.c2) ** (1.0 / self.kappa)
        out += bump
        out[xd > 0.5 + b] -= self.b3
        return out

    def in_bayes_set(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x[:, -1] <= 0.5 + self.b_omega(x[:, :-1])

    def sample(self, n: int, seed: int) -> Dataset:
        """Balanced labels; x | y=-1 by inverse CDF in x_d, x | y=+1 by rejection."""
        rng = _rng(seed, 0)
        y = np.where(rng.random(n) < 0.5, 1, -1)
        X = np.empty((n, self.d))
        neg = np.where(y < 0)[0]
        if len(neg):
            X[neg, : self.d - 1] = rng.random((len(neg), self.d - 1))
            X[neg, -1] = self._sample_q0_xd(rng, len(neg))
        pos = list(np.where(y > 0)[0])
        env = 1.0 + (self.band / self.c2) ** (1.0 / self.kappa)
        while pos:
            chunk = max(4 * len(pos), 256)
            P = rng.random((chunk, self.d))
            u = rng.random(chunk) * env
            ok = np.where(u <= self.p_omega(P))[0]
            for idx in ok:
                if not pos:
                    break
                X[pos.pop(0)] = P[idx]
        return Dataset(X, y)

    def _sample_q0_xd(self, rng, n: int) -> np.ndarray:
        lowv = 1.0 - self.eta0 - self.b1
        hiv = 1.0 + self.eta0 + self.b2
        widths = np.array([0.5, self.band, 0.5 - self.band])
        masses = widths * np.array([lowv, 1.0, hiv])
        cdf = np.cumsum(masses) / masses.sum()
        edges = np.array([0.0, 0.5, 0.5 + self.band, 1.0])
        u = rng.random(n)
        bins = np.searchsorted(cdf, u)
        left = edges[bins]
        frac = (u - np.concatenate([[0.0], cdf])[bins]) / (masses / masses.sum())[bins]
        return left + frac * widths[bins]

    def integral_defects(self) -> tuple[float, float]:
        """(|int q0 - 1|, |int p_omega - 1|), re-measured one refinement finer
        than the level the normalisers were solved at."""
        dq0 = abs(self._q0_integral() - 1.0)
        bump = _bump_mass(self, refine=1)
        upper = 0.5 - _b_omega_mass(self, refine=1)
        dpw = abs(bump - self.b3 * upper)
        return dq0, dpw

    def _q0_integral(self) -> float:
        lowv = 1.0 - self.eta0 - self.b1
        hiv = 1.0 + self.eta0 + self.b2
        return 0.5 * lowv + self.band + (0.5 - self.band) * hiv


def _gl_nodes(level: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(level)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_rule(fam: LowerBoundFamily, func, level: int, sub: int) -> float:
    """Tensor Gauss rule on [0,1]^(d-1) with sub subdivisions per lattice cell."""
    k = fam.d - 1
    M = fam.M
    nodes, weights = _gl_nodes(level)
    step = 1.0 / (M * sub)
    pts_1d = ((np.arange(M * sub) * step)[:, None] + nodes[None, :] * step).ravel()
    w_1d = np.tile(weights * step, M * sub)
    if k == 1:
        return float(np.sum(func(fam.b_omega(pts_1d[:, None])) * w_1d))
    grids = np.meshgrid(*([pts_1d] * k), indexing="ij")
    u = np.column_stack([g.ravel() for g in grids])
    wgrid = np.meshgrid(*([w_1d] * k), indexing="ij")
    w = np.ones(len(u))
    for g in wgrid:
        w *= g.ravel()
    return float(np.sum(func(fam.b_omega(u)) * w))


def _grid_quadrature(fam: LowerBoundFamily, func, level: int = 11, refine: int = 0) -> float:
    """Integrate func(b_omega(u)) over [0,1]^(d-1).

    b_omega is piecewise linear with kinks at cell boundaries for d = 2 (the
    per-cell Gauss rule is then exact for polynomial integrands) and along
    cell diagonals for d >= 3, where the rule is refined dyadically until
    two consecutive levels agree to 2e-7.
    """
    k = fam.d - 1
    if k == 1:
        return _tensor_rule(fam, func, level, 1 << refine)
    sub = 2 << refine
    prev = _tensor_rule(fam, func, level, sub)
    while sub <= 32:
        sub *= 2
        cur = _tensor_rule(fam, func, level, sub)
        if abs(cur - prev) < 2e-7:
            return cur
        prev = cur
    return prev


def _b_omega_mass(fam: LowerBoundFamily, level: int = 11, refine: int = 0) -> float:
    return _grid_quadrature(fam, lambda b: b, level, refine)


def _bump_mass(fam: LowerBoundFamily, level: int = 11, refine: int = 0) -> float:
    """Integral of the bump term of p_omega over the whole box."""
    E = fam.band
    kap = fam.kappa
    coef = fam.c2 ** (-1.0 / kap) * kap / (kap + 1.0)

    def inner(b):
        return coef * (E ** (1.0 + 1.0 / kap) - np.maximum(E - b, 0.0) ** (1.0 + 1.0 / kap))

    return _grid_quadrature(fam, inner, level, refine)


def lower_bound_densities(M: int, omega, kappa: float = 1.0, d: int = 2,
                          eta0: float = 0.1, c2: float = 1.0) -> LowerBoundFamily:
    """Build the bump-comb density pair with both members normalised to mass 1.

    Requires M >= 2 and d >= 2; omega is a flat 0/1 vector of length M^(d-1).
    eta0 is a free level parameter (the construction fixes only that the
    normalisers stay positive); b2 and b3 come out of the two normalisation
    equations, and the result is rejected if the defect exceeds 1e-6.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    if d < 2:
        raise ValueError("d must be >= 2")
    omega = tuple(int(o) for o in omega)
    if len(omega) != M ** (d - 1):
        raise ValueError(f"omega must have length M^(d-1) = {M ** (d - 1)}")
    if any(o not in (0, 1) for o in omega):
        raise ValueError("omega entries must be 0 or 1")
    E = math.exp(-M)
    b1 = c2 ** (-1.0 / kappa) * E ** (1.0 / kappa)
    if 1.0 - eta0 - b1 <= 0:
        raise NormalizationError(f"eta0={eta0} with b1={b1:.4g} makes q0 negative")
    b2 = (b1 / 2.0 + eta0 * E) / (0.5 - E)
    fam = LowerBoundFamily(
        M=M, omega=omega, kappa=kappa, d=d, eta0=eta0, c2=c2, b1=b1, b2=b2,
        b3=0.0, bump_integral=0.0,
    )
    bump = _bump_mass(fam)
    upper = 0.5 - _b_omega_mass(fam)
    b3 = bump / upper
    fam = LowerBoundFamily(
        M=M, omega=omega, kappa=kappa, d=d, eta0=eta0, c2=c2, b1=b1, b2=b2,
        b3=b3, bump_integral=bump,
    )
    dq0, dpw = fam.integral_defects()
    if max(dq0, dpw) > 1e-6:
        raise NormalizationError(f"normalisation defect q0={dq0:.2e} p_omega={dpw:.2e}")
    return fam


# ---------------------------------------------------------------------------
# distribution spec documents
# ---------------------------------------------------------------------------

def load_distribution_spec(source) -> tuple[TeacherDistribution, int]:
    """Build a distribution from a spec document {teacher, mode, tau, box, seed}."""
    if isinstance(source, (str, bytes)):
        doc = json.loads(source)
    else:
        doc = source
    net = from_document(doc["teacher"])
    box_doc = doc.get("box", {"lo": [0.0] * net.input_dim, "hi": [1.0] * net.input_dim})
    box = Box(box_doc["lo"], box_doc["hi"])
    dist = normalize_teacher(net, box)
    mode = doc.get("mode", "overlap")
    if mode == "separable":
        dist = separable(dist, doc.get("tau"))
    elif mode != "overlap":
        raise ValueError(f"unknown mode {mode!r}")
    return dist, int(doc.get("seed", 0))


def distribution_spec_document(dist: TeacherDistribution, seed: int = 0) -> dict:
    doc = {
        "teacher": to_document(dist.net),
        "mode": dist.mode,
        "tau": dist.tau,
        "box": {"lo": list(dist.box.lo), "hi": list(dist.box.hi)},
        "seed": seed,
    }
    return doc
