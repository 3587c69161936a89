"""Exact linear-region geometry of ReLU networks over a box domain.

The enumerator subdivides the box layer by layer: every hidden unit's
pre-activation is affine on each current cell (its coefficients are determined
by the cell's activation pattern on earlier layers), so a unit either keeps a
constant sign on the cell or splits it along a line/hyperplane.  Cells carry
their vertex sets, which makes the sign test exact for bounded cells: an
affine function attains its extremes at vertices.

Number types:
  * d <= 2: scalar-generic cells (python lists), run either on floats or on
    `fractions.Fraction` (exact mode; float inputs convert losslessly).
  * d = 3, 4: numpy float vertices with a 1e-8-style tolerance; candidate
    vertex sets are pruned to their extreme points with Qhull, and every final
    cell is re-verified against direct evaluation.

Region counts from any mode are checked against the closed-form upper bound;
a violation raises, since exact counts are the whole point of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import bounds as _bounds
from .network import NetworkParams, evaluate

__all__ = [
    "Box",
    "Polytope",
    "LinearRegion",
    "RegionDecomposition",
    "EnumerationError",
    "enumerate_regions",
    "count_active_pieces",
    "piece_vertices",
    "decision_region",
    "volume",
    "symmetric_difference_volume",
    "clip_polytope",
    "intersect_polytopes",
    "integrate_affine",
    "bracket_cover_1d",
    "bracket_defect",
    "find_bracket",
]

# boundary-touching pre-activations below this count as "does not cross"
ACTIVE_TOL = 1e-12
VERTEX_DEDUP_TOL = 1e-9


class EnumerationError(RuntimeError):
    """Internal inconsistency during region enumeration (should never fire)."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-coordinate (lo, hi)."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __init__(self, lo, hi):
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        hi = tuple(float(v) for v in np.atleast_1d(hi))
        if len(lo) != len(hi) or any(l >= h for l, h in zip(lo, hi)):
            raise ValueError(f"invalid box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls([0.0] * d, [1.0] * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def corners(self) -> np.ndarray:
        d = self.dim
        pts = np.zeros((2 ** d, d))
        for i in range(2 ** d):
            for j in range(d):
                pts[i, j] = self.hi[j] if (i >> j) & 1 else self.lo[j]
        return pts

    def grid(self, n: int) -> np.ndarray:
        """Roughly n probe points: a uniform lattice (d <= 2) or scrambled Sobol."""
        d = self.dim
        lo, hi = np.array(self.lo), np.array(self.hi)
        if d == 1:
            return np.linspace(lo[0], hi[0], n)[:, None]
        if d == 2:
            m = int(math.isqrt(n))
            xs = np.linspace(lo[0], hi[0], m)
            ys = np.linspace(lo[1], hi[1], m)
            gx, gy = np.meshgrid(xs, ys)
            return np.column_stack([gx.ravel(), gy.ravel()])
        from scipy.stats import qmc

        pts = qmc.Sobol(d, scramble=True, seed=0).random(n)
        return lo + pts * (hi - lo)

    def sample(self, n: int, rng) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + rng.random((n, self.dim)) * (hi - lo)


class Polytope:
    """Bounded convex polytope with both representations.

    `vertices` is a (k, d) float array; `A`, `b` give the halfspaces A x <= b.
    In 2-D the vertex list is counter-clockwise.
    """

    def __init__(self, vertices, A, b):
        self.vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.dim = self.vertices.shape[1]

    @classmethod
    def from_interval(cls, lo: float, hi: float) -> "Polytope":
        return cls([[float(lo)], [float(hi)]], [[-1.0], [1.0]], [-float(lo), float(hi)])

    @classmethod
    def from_polygon(cls, verts) -> "Polytope":
        """Polytope from a CCW 2-D vertex list; halfspaces from the edges."""
        v = np.atleast_2d(np.asarray(verts, dtype=float))
        rows, rhs = [], []
        k = len(v)
        for i in range(k):
            p, q = v[i], v[(i + 1) % k]
            e = q - p
            norm = math.hypot(e[0], e[1])
            if norm < 1e-300:
                continue
            n = np.array([e[1], -e[0]]) / norm  # outward for CCW
            rows.append(n)
            rhs.append(float(n @ p))
        return cls(v, rows, rhs)

    @classmethod
    def from_box(cls, box: Box) -> "Polytope":
        d = box.dim
        if d == 1:
            return cls.from_interval(box.lo[0], box.hi[0])
        if d == 2:
            l, h = box.lo, box.hi
            return cls.from_polygon([(l[0], l[1]), (h[0], l[1]), (h[0], h[1]), (l[0], h[1])])
        A = np.vstack([-np.eye(d), np.eye(d)])
        b = np.concatenate([-np.array(box.lo), np.array(box.hi)])
        return cls(box.corners(), A, b)

    @classmethod
    def from_points(cls, points) -> "Polytope":
        """Convex hull of a point cloud (d >= 2); raises on degenerate input."""
        from scipy.spatial import ConvexHull

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]
        if pts.shape[1] == 2:
            return cls.from_polygon(verts)  # hull.vertices is CCW in 2-D
        return cls(verts, hull.equations[:, :-1], -hull.equations[:, -1])

    def contains(self, points, tol: float = 1e-9):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts @ self.A.T <= self.b + tol).all(axis=1)

    def __repr__(self):
        return f"Polytope(d={self.dim}, vertices={len(self.vertices)})"


@dataclass(frozen=True)
class LinearRegion:
    """One cell of the decomposition: pattern, affine map, polytope."""

    pattern: tuple[int, ...]
    gradient: np.ndarray
    offset: float
    cell: Polytope

    @property
    def pattern_bits(self) -> str:
        return "".join(str(p) for p in self.pattern)

    def affine_at(self, points) -> np.ndarray:
        return np.atleast_2d(points) @ self.gradient + self.offset


@dataclass(frozen=True)
class RegionDecomposition:
    """All linear regions of a net over a box, sorted by activation pattern."""

    net: NetworkParams
    box: Box
    regions: tuple[LinearRegion, ...]
    exact: bool

    @property
    def num_regions(self) -> int:
        return len(self.regions)

    @property
    def num_active(self) -> int:
        return count_active_pieces(self)

    def vertices(self) -> np.ndarray:
        return piece_vertices(self)


# ---------------------------------------------------------------------------
# scalar-generic cells for d <= 2 (floats or Fractions)
# ---------------------------------------------------------------------------

def _shoelace2(verts):
    """Twice the signed area of a polygon given as [(x, y), ...]."""
    s = 0
    k = len(verts)
    for i in range(k):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % k]
        s += x1 * y2 - x2 * y1
    return s


def _split_interval(verts, vals, tol):
    """Split [lo, hi] at the root of an affine function with both signs."""
    (lo,), (hi,) = verts
    vlo, vhi = vals
    t = lo + (hi - lo) * (vlo / (vlo - vhi))
    neg = [(lo,), (t,)] if vlo < 0 else [(t,), (hi,)]
    pos = [(t,), (hi,)] if vlo < 0 else [(lo,), (t,)]
    return pos, neg


def _split_polygon(verts, vals, tol):
    """Clip a CCW polygon by the line {val = 0}; returns (pos side, neg side)."""
    pos, neg = [], []
    k = len(verts)
    for i in range(k):
        a, va = verts[i], vals[i]
        b, vb = verts[(i + 1) % k], vals[(i + 1) % k]
        if va >= -tol:
            pos.append(a)
        if va <= tol:
            neg.append(a)
        if (va > tol and vb < -tol) or (va < -tol and vb > tol):
            t = va / (va - vb)
            cut = (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)
            pos.append(cut)
            neg.append(cut)
    return pos, neg


def _cell_measure(verts, d):
    if d == 1:
        return verts[1][0] - verts[0][0] if len(verts) == 2 else 0
    if len(verts) < 3:
        return 0
    return abs(_shoelace2(verts)) / 2


class _CellLow:
    """Mutable enumeration cell for d <= 2."""

    __slots__ = ("verts", "pattern", "curM", "curc", "layer_rows", "layer_offs")

    def __init__(self, verts, pattern, curM, curc):
        self.verts = verts
        self.pattern = pattern
        self.curM = curM  # list of rows, each a list of d scalars
        self.curc = curc  # list of scalars
        self.layer_rows = None
        self.layer_offs = None


def _enumerate_low(net: NetworkParams, box: Box, exact: bool):
    """Enumeration for d <= 2 on generic scalars."""
    d = box.dim
    conv = (lambda x: Fraction(x)) if exact else float
    tol = 0 if exact else 1e-11

    if d == 1:
        verts0 = [(conv(box.lo[0]),), (conv(box.hi[0]),)]
    else:
        l0, l1 = conv(box.lo[0]), conv(box.lo[1])
        h0, h1 = conv(box.hi[0]), conv(box.hi[1])
        verts0 = [(l0, l1), (h0, l1), (h0, h1), (l0, h1)]

    ident = [[conv(1) if j == i else conv(0) for j in range(d)] for i in range(d)]
    cells = [_CellLow(verts0, [], ident, [conv(0)] * d)]
    min_measure = 0 if exact else 1e-13 * box.volume

    for w, bvec in net.layers[:-1]:
        wq = [[conv(x) for x in row] for row in w.tolist()]
        bq = [conv(x) for x in bvec.tolist()]
        m_out = len(wq)
        for cell in cells:
            cell.layer_rows = [
                [sum(wq[i][k] * cell.curM[k][j] for k in range(len(cell.curM))) for j in range(d)]
                for i in range(m_out)
            ]
            cell.layer_offs = [
                sum(wq[i][k] * cell.curc[k] for k in range(len(cell.curc))) + bq[i]
                for i in range(m_out)
            ]
        for i in range(m_out):
            nxt = []
            for cell in cells:
                row, off = cell.layer_rows[i], cell.layer_offs[i]
                vals = [sum(r * v for r, v in zip(row, vt)) + off for vt in cell.verts]
                vmin, vmax = min(vals), max(vals)
                if vmax <= tol:
                    # inactive; an identically-zero pre-activation lands here too
                    cell.pattern.append(0)
                    nxt.append(cell)
                elif vmin >= -tol:
                    cell.pattern.append(1)
                    nxt.append(cell)
                else:
                    split = _split_interval if d == 1 else _split_polygon
                    pos, neg = split(cell.verts, vals, tol)
                    for side_verts, bit in ((neg, 0), (pos, 1)):
                        if _cell_measure(side_verts, d) <= min_measure:
                            continue
                        child = _CellLow(
                            side_verts, cell.pattern + [bit], cell.curM, cell.curc
                        )
                        child.layer_rows = cell.layer_rows
                        child.layer_offs = cell.layer_offs
                        nxt.append(child)
            cells = nxt
        for cell in cells:
            bits = cell.pattern[-m_out:]
            cell.curM = [
                [cell.layer_rows[i][j] if bits[i] else conv(0) for j in range(d)]
                for i in range(m_out)
            ]
            cell.curc = [cell.layer_offs[i] if bits[i] else conv(0) for i in range(m_out)]
            cell.layer_rows = cell.layer_offs = None

    wout, bout = net.layers[-1]
    woutq = [conv(x) for x in wout[0].tolist()]
    boutq = conv(float(bout[0]))
    regions = []
    for cell in cells:
        grad = [sum(woutq[k] * cell.curM[k][j] for k in range(len(cell.curM))) for j in range(d)]
        off = sum(woutq[k] * cell.curc[k] for k in range(len(cell.curc))) + boutq
        fverts = [[float(x) for x in vt] for vt in cell.verts]
        poly = (
            Polytope.from_interval(fverts[0][0], fverts[1][0])
            if d == 1
            else Polytope.from_polygon(fverts)
        )
        regions.append(
            LinearRegion(tuple(cell.pattern), np.array([float(g) for g in grad]), float(off), poly)
        )
    return regions


# ---------------------------------------------------------------------------
# d = 3, 4: float vertex sets pruned with Qhull
# ---------------------------------------------------------------------------

class _CellHigh:
    __slots__ = ("verts", "pattern", "curM", "curc")

    def __init__(self, verts, pattern, curM, curc):
        self.verts = verts
        self.pattern = pattern
        self.curM = curM
        self.curc = curc


def _extreme_points(points: np.ndarray) -> np.ndarray | None:
    """Extreme points of a candidate cloud; None when degenerate (flat)."""
    from scipy.spatial import ConvexHull, QhullError

    if len(points) <= points.shape[1]:
        return None
    try:
        hull = ConvexHull(points)
    except QhullError:
        return None
    if hull.volume <= 1e-12:
        return None
    return points[hull.vertices]


def _split_cloud(verts: np.ndarray, vals: np.ndarray, tol: float):
    """Split a vertex cloud by {val = 0}: kept points plus segment crossings.

    All vertex pairs are scanned, not just true polytope edges; spurious
    crossing points are interior to a face and disappear when the candidate
    set is pruned to its extreme points.
    """
    pos_idx = vals >= -tol
    neg_idx = vals <= tol
    cross_a, cross_b = np.where(
        (vals[:, None] > tol) & (vals[None, :] < -tol)
    )
    if len(cross_a):
        va, vb = vals[cross_a], vals[cross_b]
        t = (va / (va - vb))[:, None]
        cuts = verts[cross_a] + t * (verts[cross_b] - verts[cross_a])
    else:
        cuts = np.zeros((0, verts.shape[1]))
    pos = np.vstack([verts[pos_idx], cuts])
    neg = np.vstack([verts[neg_idx], cuts])
    return pos, neg


def _enumerate_high(net: NetworkParams, box: Box):
    d = box.dim
    cells = [_CellHigh(box.corners(), [], np.eye(d), np.zeros(d))]
    for w, bvec in net.layers[:-1]:
        m_out = w.shape[0]
        layer_maps = [(w @ c.curM, w @ c.curc + bvec) for c in cells]
        for i in range(m_out):
            nxt, maps = [], []
            for cell, (rows, offs) in zip(cells, layer_maps):
                vals = cell.verts @ rows[i] + offs[i]
                tol = 1e-9 * max(1.0, float(np.abs(vals).max()))
                if vals.max() <= tol:
                    cell.pattern.append(0)
                    nxt.append(cell)
                    maps.append((rows, offs))
                elif vals.min() >= -tol:
                    cell.pattern.append(1)
                    nxt.append(cell)
                    maps.append((rows, offs))
                else:
                    pos, neg = _split_cloud(cell.verts, vals, tol)
                    for cloud, bit in ((neg, 0), (pos, 1)):
                        pruned = _extreme_points(cloud)
                        if pruned is None:
                            continue
                        nxt.append(_CellHigh(pruned, cell.pattern + [bit], cell.curM, cell.curc))
                        maps.append((rows, offs))
            cells, layer_maps = nxt, maps
        for cell, (rows, offs) in zip(cells, layer_maps):
            mask = np.array(cell.pattern[-m_out:], dtype=float)
            cell.curM = rows * mask[:, None]
            cell.curc = offs * mask
    wout, bout = net.layers[-1]
    regions = []
    for cell in cells:
        grad = (wout @ cell.curM)[0]
        off = float((wout @ cell.curc + bout)[0])
        poly = Polytope.from_points(cell.verts)
        # post-hoc check: the recorded affine map must reproduce the net at
        # the cell's interior centroid
        centroid = poly.vertices.mean(axis=0)
        direct = evaluate(net, centroid)
        if abs(direct - (grad @ centroid + off)) > 1e-6 * max(1.0, abs(direct)):
            raise EnumerationError("affine map mismatch at cell centroid")
        regions.append(LinearRegion(tuple(cell.pattern), grad, off, poly))
    return regions


def enumerate_regions(
    net: NetworkParams, box: Box, exact: bool | None = None
) -> RegionDecomposition:
    """Partition the box into the net's linear regions.

    `exact=None` picks rational arithmetic for d <= 2 and the float path for
    d = 3, 4 (the practical exactness budget ends at d = 4).  Zero-volume
    cells are dropped; regions come back sorted by activation pattern, so the
    result is deterministic regardless of evaluation order.
    """
    d = box.dim
    if net.input_dim != d:
        raise ValueError(f"net input dim {net.input_dim} != box dim {d}")
    if d > 4:
        raise ValueError("exact enumeration supports d <= 4")
    if exact is None:
        exact = d <= 2
    if exact and d > 2:
        raise ValueError("rational mode supports d <= 2")
    regions = _enumerate_low(net, box, exact) if d <= 2 else _enumerate_high(net, box)
    regions.sort(key=lambda r: r.pattern)
    cap = _bounds.serra_upper_bound(_bounds.Architecture(d, net.hidden_widths or (0,)))
    if len(regions) > cap:
        raise EnumerationError(f"{len(regions)} regions exceed the closed-form cap {cap}")
    return RegionDecomposition(net=net, box=box, regions=tuple(regions), exact=exact)


# ---------------------------------------------------------------------------
# queries on a decomposition
# ---------------------------------------------------------------------------

def count_active_pieces(decomp: RegionDecomposition) -> int:
    """Regions whose affine map strictly crosses zero on the cell.

    A map that touches zero (min exactly 0, never negative) does not count:
    the function must attain both signs.
    """
    n = 0
    for region in decomp.regions:
        vals = region.cell.vertices @ region.gradient + region.offset
        if vals.min() < -ACTIVE_TOL and vals.max() > ACTIVE_TOL:
            n += 1
    return n


def piece_vertices(decomp: RegionDecomposition) -> np.ndarray:
    """Deduplicated union of all cell vertices (1e-9 Euclidean tolerance)."""
    pts = np.vstack([r.cell.vertices for r in decomp.regions])
    return _dedup_points(pts, VERTEX_DEDUP_TOL)


def _dedup_points(pts: np.ndarray, tol: float) -> np.ndarray:
    from scipy.spatial import cKDTree

    if len(pts) == 0:
        return pts
    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(pts))])
    keep = np.unique(roots)
    return pts[keep]


def decision_region(decomp: RegionDecomposition) -> list[Polytope]:
    """The nonnegativity set {f >= 0} as a list of convex pieces, one per cell."""
    pieces = []
    for region in decomp.regions:
        clipped = clip_polytope(region.cell, region.gradient, region.offset)
        if clipped is not None:
            pieces.append(clipped)
    return pieces


def clip_polytope(poly: Polytope, grad, off: float) -> Polytope | None:
    """Intersect a polytope with {grad . x + off >= 0}; None if (near-)empty."""
    grad = np.asarray(grad, dtype=float)
    d = poly.dim
    vals = poly.vertices @ grad + off
    tol = 1e-12 * max(1.0, float(np.abs(vals).max()))
    if vals.max() <= tol:
        return None
    if vals.min() >= -tol:
        return poly
    if d == 1:
        xs = poly.vertices[:, 0]
        lo, hi = float(xs.min()), float(xs.max())
        root = -off / grad[0]
        lo, hi = (root, hi) if grad[0] > 0 else (lo, root)
        if hi - lo <= 1e-14:
            return None
        return Polytope.from_interval(lo, hi)
    if d == 2:
        verts = [tuple(v) for v in poly.vertices.tolist()]
        pos, _ = _split_polygon(verts, list(vals), 0.0)
        if _cell_measure(pos, 2) <= 1e-14:
            return None
        return Polytope.from_polygon(pos)
    pos, _ = _split_cloud(poly.vertices, vals, tol)
    pruned = _extreme_points(pos)
    return None if pruned is None else Polytope.from_points(pruned)


def intersect_polytopes(p: Polytope, q: Polytope) -> Polytope | None:
    """Intersection of two bounded polytopes (d <= 2); None if (near-)empty."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    out = p
    for a_row, b_val in zip(q.A, q.b):
        out = clip_polytope(out, -a_row, b_val)  # a.x <= b  <=>  -a.x + b >= 0
        if out is None:
            return None
    return out


def volume(poly: Polytope, mode: str = "exact", box: Box | None = None,
           samples: int = 65536, seed: int = 0):
    """Volume of a polytope: exact for d <= 2, Monte Carlo (with SE) otherwise.

    Exact mode is interval length (d=1) or the shoelace area (d=2) and errors
    for d >= 3.  MC mode needs an enclosing box and returns (estimate, se).
    """
    if mode == "exact":
        if poly.dim == 1:
            xs = poly.vertices[:, 0]
            return float(xs.max() - xs.min())
        if poly.dim == 2:
            return abs(_shoelace2([tuple(v) for v in poly.vertices.tolist()])) / 2.0
        raise ValueError("exact volume supports d <= 2 only; use mode='mc'")
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if box is None:
        lo = poly.vertices.min(axis=0)
        hi = poly.vertices.max(axis=0)
        box = Box(lo, hi + (hi - lo == 0) * 1e-9)
    rng = np.random.default_rng(seed)
    pts = box.sample(samples, rng)
    inside = poly.contains(pts)
    p = inside.mean()
    est = p * box.volume
    se = math.sqrt(max(p * (1 - p), 0.0) / samples) * box.volume
    return est, se


def _union_volume_exact(regions: list[Polytope]) -> float:
    """Total volume of polytopes with pairwise disjoint interiors (d <= 2)."""
    return sum(volume(p) for p in regions)


def symmetric_difference_volume(
    regionsA: list[Polytope],
    regionsB: list[Polytope],
    mode: str = "exact",
    box: Box | None = None,
    samples: int = 1 << 17,
    seed: int = 0,
):
    """Lebesgue measure of (union A) symmetric-difference (union B).

    Each argument is a list of convex pieces with pairwise disjoint interiors
    (as produced by `decision_region`).  Exact mode (d <= 2) uses
    vol(A) + vol(B) - 2 vol(A cap B); MC mode returns (estimate, se).
    """
    if mode == "exact":
        dims = {p.dim for p in regionsA} | {p.dim for p in regionsB}
        if dims - {1, 2}:
            raise ValueError("exact mode supports d <= 2 only; use mode='mc'")
        va = _union_volume_exact(regionsA)
        vb = _union_volume_exact(regionsB)
        vab = 0.0
        for p in regionsA:
            for q in regionsB:
                inter = intersect_polytopes(p, q)
                if inter is not None:
                    vab += volume(inter)
        return va + vb - 2.0 * vab
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if box is None:
        raise ValueError("MC mode needs an enclosing box")
    rng = np.random.default_rng(seed)
    pts = box.sample(samples, rng)
    in_a = np.zeros(len(pts), dtype=bool)
    for p in regionsA:
        in_a |= p.contains(pts)
    in_b = np.zeros(len(pts), dtype=bool)
    for q in regionsB:
        in_b |= q.contains(pts)
    diff = in_a ^ in_b
    p_hat = diff.mean()
    est = p_hat * box.volume
    se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / samples) * box.volume
    return est, se


def integrate_affine(poly: Polytope, grad, off: float) -> float:
    """Exact integral of (grad . x + off) over a polytope, d <= 2."""
    grad = np.asarray(grad, dtype=float)
    if poly.dim == 1:
        xs = poly.vertices[:, 0]
        lo, hi = float(xs.min()), float(xs.max())
        mid = 0.5 * (lo + hi)
        return (grad[0] * mid + off) * (hi - lo)
    if poly.dim == 2:
        verts = poly.vertices
        k = len(verts)
        area2 = 0.0
        cx = cy = 0.0
        for i in range(k):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % k]
            cross = x1 * y2 - x2 * y1
            area2 += cross
            cx += (x1 + x2) * cross
            cy += (y1 + y2) * cross
        area = area2 / 2.0
        if abs(area) < 1e-300:
            return 0.0
        cx /= 3.0 * area2
        cy /= 3.0 * area2
        return (grad[0] * cx + grad[1] * cy + off) * abs(area)
    raise ValueError("exact integration supports d <= 2")


# ---------------------------------------------------------------------------
# bracket cover on [0, 1]
# ---------------------------------------------------------------------------

def bracket_cover_1d(delta: float, max_vertices: int = 2):
    """All grid brackets (U, V) needed to 2*delta-bracket any subinterval of [0,1].

    Grid points are i/M for the smallest M >= 1/delta; the pair indexed by
    (i, j), i <= j, is U = [x_{i+1}, x_j] (empty when i = j, encoded None) and
    V = [x_i, x_{j+1}].  There are M(M+1)/2 = C(M+1, 2) pairs and every
    subinterval [a, b] is sandwiched by the pair with i = floor(a M),
    j = floor(b M) (capped at M-1), with defect at most 2/M <= 2*delta.

    `max_vertices` is accepted for interface symmetry with the general
    polyhedron budget; intervals have two vertices, so any value >= 2 yields
    the same cover.
    """
    if not (0 < delta < 1):
        raise ValueError("delta must be in (0, 1)")
    if max_vertices < 2:
        raise ValueError("an interval has 2 vertices; max_vertices must be >= 2")
    M = math.ceil(1.0 / delta)
    x = [i / M for i in range(M + 1)]
    pairs = []
    for i in range(M):
        for j in range(i, M):
            U = None if i == j else (x[i + 1], x[j])
            V = (x[i], x[j + 1])
            pairs.append((U, V))
    return pairs


def bracket_defect(pair) -> float:
    """d_triangle(U, V) for a bracket pair (U inside V)."""
    U, V = pair
    inner = 0.0 if U is None else max(0.0, U[1] - U[0])
    return (V[1] - V[0]) - inner


def find_bracket(pairs, a: float, b: float):
    """The covering pair for [a, b] from a `bracket_cover_1d` result."""
    # len(pairs) = M(M+1)/2 recovers the grid resolution
    M = round((math.isqrt(1 + 8 * len(pairs)) - 1) / 2)
    if M * (M + 1) // 2 != len(pairs):
        raise ValueError("pairs not produced by bracket_cover_1d")
    i = min(int(a * M), M - 1)
    j = max(min(int(b * M), M - 1), i)
    # pairs are emitted row-major over i <= j
    idx = i * M - i * (i - 1) // 2 + (j - i)
    return pairs[idx]
