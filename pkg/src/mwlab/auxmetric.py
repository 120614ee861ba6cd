"""Auxiliary functions of matrix weights and their Agmon distance fields.

The auxiliary function at a point x is the reciprocal of the largest radius
r at which a criterion of the scale-weighted average Psi(x, r) stays <= 1:
the smallest eigenvalue for the lower function, the largest for the upper,
the quadratic form along a fixed unit vector for the directional variant,
and the plain value for scalar weights.  Distances integrate an auxiliary
field along lattice paths (Dijkstra on the 3^n - 1 stencil), which is exact
for constant fields in the sup-norm convention.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .cubature import Cube, adaptive_integrate, psi_many
from .errors import BracketFailure, ConfigError, DomainError
from .weights import MatrixWeight, ScalarDiagWeight, ScalarWeight, symmetrize

R_BRACKET = (1e-4, 1e4)     # global radius bracket for criterion scans
SCAN_PER_DECADE = 64        # fine scan density (last-crossing resolution)
COARSE_PER_DECADE = 16
BISECT_RTOL = 1e-8

_KINDS = ("lower", "upper", "directional")


@dataclass(frozen=True)
class AuxQuery:
    """A single auxiliary-function query (point, criterion kind, bracket)."""

    x: np.ndarray
    kind: str = "lower"
    e: Optional[np.ndarray] = None
    bracket: tuple = R_BRACKET

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown auxiliary kind {self.kind!r}")
        if self.kind == "directional":
            if self.e is None:
                raise ConfigError("directional queries need a unit vector")
            e = np.asarray(self.e, dtype=float)
            object.__setattr__(self, "e", e / np.linalg.norm(e))
        if not (0 < self.bracket[0] < self.bracket[1]):
            raise ConfigError("bracket must satisfy 0 < r_lo < r_hi")


def as_matrix_weight(v) -> MatrixWeight:
    """Wrap a scalar weight as a 1x1 matrix weight (identity on matrix weights)."""
    if isinstance(v, MatrixWeight):
        return v
    if isinstance(v, ScalarWeight):
        return ScalarDiagWeight(entries=(v,), n=v.n)
    raise ConfigError("expected a matrix or scalar weight")


# ---------------------------------------------------------------------------
# criterion evaluation
# ---------------------------------------------------------------------------

def _criterion_many(W: MatrixWeight, X: np.ndarray, r, kind: str,
                    e: Optional[np.ndarray], coarse: bool = False) -> np.ndarray:
    """Criterion of Psi(x, r) for a batch of centers; r scalar or (M,).

    Weights without closed-form cube integrals fall back to per-point
    adaptive quadrature; the ladder scan runs it coarse (the crossing only
    needs to be bracketed) and bisection tightens it.
    """
    X = np.atleast_2d(X)
    P = psi_many(W, X, r)
    if P is None:
        tol, lvl = (1e-3, 3) if coarse else (1e-4, 4)
        rs = np.broadcast_to(np.asarray(r, dtype=float), (X.shape[0],))
        n = W.n
        mats = []
        for i in range(X.shape[0]):
            cube = Cube(center=X[i], r=float(rs[i]))
            total, _ = adaptive_integrate(W.eval_many, cube,
                                          singular=W.singular_at_origin,
                                          tol=tol, max_level=lvl, strict=False)
            mats.append(symmetrize(total) * float(rs[i]) ** (2 - n))
        P = np.stack(mats)
    if kind == "lower":
        return np.linalg.eigvalsh(P)[:, 0]
    if kind == "upper":
        return np.linalg.eigvalsh(P)[:, -1]
    return np.einsum("mij,i,j->m", P, e, e)


def _has_exact(W: MatrixWeight) -> bool:
    return W.exact_cube_integral_many(np.zeros((1, W.n)) + 0.5, 1.0) is not None


def aux_values_many(W, X: np.ndarray, kind: str = "lower",
                    e: Optional[np.ndarray] = None,
                    bracket: tuple = R_BRACKET,
                    rtol: float = BISECT_RTOL) -> np.ndarray:
    """Vectorized auxiliary function over an (M, n) batch of points.

    The defining radius is the supremum of the set where the criterion stays
    <= 1, located as the last downward crossing of a geometric ladder (the
    set need not be an interval) and then sharpened by bisection.
    """
    W = as_matrix_weight(W)
    if W.n < 3:
        raise DomainError("auxiliary functions require ambient dimension >= 3")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kind == "directional":
        if e is None:
            raise ConfigError("directional queries need a unit vector")
        e = np.asarray(e, dtype=float)
        e = e / np.linalg.norm(e)
    exact = _has_exact(W)
    density = SCAN_PER_DECADE if exact else COARSE_PER_DECADE
    lo, hi = bracket
    decades = math.log10(hi / lo)
    ladder = np.geomspace(lo, hi, int(round(decades * density)) + 1)

    m = X.shape[0]
    left = np.full(m, -1)          # ladder index of the last (<=1 -> >1) flip
    prev_le = None
    below_any = np.zeros(m, dtype=bool)
    for i, r in enumerate(ladder):
        le = _criterion_many(W, X, float(r), kind, e, coarse=True) <= 1.0
        below_any |= le
        if prev_le is not None:
            flip = prev_le & ~le
            left[flip] = i - 1
        prev_le = le
    if np.any(le):  # criterion still <= 1 at the top rung: sup escapes bracket
        j = int(np.argmax(le))
        raise BracketFailure(
            f"criterion <= 1 at r_max={hi:g} for x={X[j]}; enlarge the bracket")
    if np.any(~below_any):
        j = int(np.argmax(~below_any))
        raise BracketFailure(
            f"criterion never dipped <= 1 inside [{lo:g}, {hi:g}] for x={X[j]}")

    r_lo = ladder[left]
    r_hi = ladder[left + 1]
    # quadrature-backed weights keep the coarse evaluation through bisection:
    # all criterion kinds then see the same deterministic Psi(x, r), which is
    # what makes the lower/directional/upper ordering exact by construction
    it = int(math.ceil(math.log2(math.log(ladder[1] / ladder[0]) / rtol))) + 2
    for _ in range(it):
        mids = np.sqrt(r_lo * r_hi)
        le = _criterion_many(W, X, mids, kind, e, coarse=True) <= 1.0
        r_lo = np.where(le, mids, r_lo)
        r_hi = np.where(le, r_hi, mids)
    return 1.0 / np.sqrt(r_lo * r_hi)


def aux_value(W, x, kind: str = "lower", e: Optional[np.ndarray] = None,
              bracket: tuple = R_BRACKET) -> float:
    """Auxiliary function at a single point (lower, upper, or directional)."""
    W = as_matrix_weight(W)
    return float(aux_values_many(W, np.asarray(x, dtype=float)[None, :],
                                 kind=kind, e=e, bracket=bracket)[0])


def aux_query(W, query: AuxQuery) -> float:
    return aux_value(W, query.x, kind=query.kind, e=query.e, bracket=query.bracket)


def scalar_aux_value(v, x, bracket: tuple = R_BRACKET) -> float:
    """m(x, v) for a scalar weight (the one-dimensional criterion)."""
    return aux_value(as_matrix_weight(v), x, kind="lower", bracket=bracket)


# ---------------------------------------------------------------------------
# fields on box grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxGrid:
    """Uniform grid on [-L, L]^n with m intervals (m + 1 nodes) per axis."""

    L: float
    m: int
    n: int = 3

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError("need at least two intervals per axis")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.m

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.m + 1)

    @property
    def shape(self) -> tuple:
        return (self.m + 1,) * self.n

    @property
    def size(self) -> int:
        return (self.m + 1) ** self.n

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(int(i) for i in multi), self.shape))

    def node(self, idx: int) -> np.ndarray:
        multi = np.unravel_index(idx, self.shape)
        ax = self.axis
        return np.array([ax[i] for i in multi])


@dataclass
class AuxField:
    """Auxiliary-function values sampled on a box grid."""

    grid: BoxGrid
    values: np.ndarray            # flat, C-order over the grid shape
    kind: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.shape[0] != self.grid.size:
            raise ConfigError("field size does not match the grid")
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            raise ConfigError("auxiliary values must be positive and finite")
        self.values = vals


@dataclass
class DistanceField:
    """Single-source geodesic distances for the metric m(x) |dx|."""

    grid: BoxGrid
    source: int                   # flat node index
    values: np.ndarray
    kind: str
    norm: str = "linf"


def aux_field(W, grid: BoxGrid, kind: str = "lower",
              e: Optional[np.ndarray] = None) -> AuxField:
    """Node-wise auxiliary function over a box grid."""
    W = as_matrix_weight(W)
    vals = aux_values_many(W, grid.nodes(), kind=kind, e=e)
    return AuxField(grid=grid, values=vals, kind=kind)


def _stencil_offsets(n: int):
    ranges = [(-1, 0, 1)] * n
    out = []

    def rec(prefix):
        if len(prefix) == n:
            if any(prefix):
                out.append(tuple(prefix))
            return
        for v in ranges[len(prefix)]:
            rec(prefix + [v])

    rec([])
    return out


def agmon_field(field: AuxField, source, norm: str = "linf") -> DistanceField:
    """Shortest-path distance from a source node in the metric m(x)|dx|.

    Lattice graph with the full 3^n - 1 neighbor stencil; edge cost is the
    endpoint average of m times the step length in the chosen norm.  In the
    sup-norm convention every stencil step has length h, so constant fields
    give exactly m * |x - y|_inf.
    """
    grid = field.grid
    if isinstance(source, (tuple, list, np.ndarray)):
        source = grid.index(source)
    shape = grid.shape
    h = grid.h
    vals = field.values.reshape(shape)
    rows, cols, costs = [], [], []
    idx = np.arange(grid.size).reshape(shape)
    for off in _stencil_offsets(grid.n):
        # visit each undirected edge once
        if off < tuple([0] * grid.n):
            continue
        src_sl = tuple(slice(None, -1) if o == 1 else slice(1, None) if o == -1
                       else slice(None) for o in off)
        dst_sl = tuple(slice(1, None) if o == 1 else slice(None, -1) if o == -1
                       else slice(None) for o in off)
        a = idx[src_sl].ravel()
        b = idx[dst_sl].ravel()
        if norm == "linf":
            step = h
        elif norm == "l2":
            step = h * math.sqrt(sum(o * o for o in off))
        else:
            raise ConfigError(f"unknown path norm {norm!r}")
        w = 0.5 * (field.values[a] + field.values[b]) * step
        rows.append(a)
        cols.append(b)
        costs.append(w)
    graph = coo_matrix((np.concatenate(costs),
                        (np.concatenate(rows), np.concatenate(cols))),
                       shape=(grid.size, grid.size))
    dist = _csgraph_dijkstra(graph.tocsr(), directed=False, indices=source)
    return DistanceField(grid=grid, source=int(source), values=dist,
                         kind=field.kind, norm=norm)


# ---------------------------------------------------------------------------
# slow variation and close-pair diagnostics
# ---------------------------------------------------------------------------

def _sample_pairs(grid: BoxGrid, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, grid.size, size=(count, 2))


def slow_variation_check(field: AuxField, pairs: Optional[np.ndarray] = None,
                         count: int = 10000, seed: int = 2):
    """Empirical slow-variation constants of an auxiliary field.

    Returns (C_a, C_b, c_c, k0):

    * C_a bounds the two-sided ratio m(x)/m(y) over pairs with
      |x - y|_inf <= 1/m(x);
    * m(y) <= C_b (1 + |x-y| m(x))^k0 m(x) over all sampled pairs, with k0
      fitted on the log-log upper envelope;
    * m(y) >= c_c m(x) / (1 + |x-y| m(x))^(k0/(k0+1)).
    """
    grid = field.grid
    if pairs is None:
        pairs = _sample_pairs(grid, count, seed)
    nodes = grid.nodes()
    a, b = pairs[:, 0], pairs[:, 1]
    keep = a != b
    a, b = a[keep], b[keep]
    ma, mb = field.values[a], field.values[b]
    sep = np.max(np.abs(nodes[a] - nodes[b]), axis=1)

    close = sep <= 1.0 / ma
    if np.any(close):
        ratio = np.maximum(ma[close] / mb[close], mb[close] / ma[close])
        C_a = float(ratio.max())
    else:
        C_a = 1.0

    t = np.log1p(sep * ma)
    z = np.log(mb / ma)
    # upper envelope: smallest k0 >= 0 whose affine majorant has the least
    # excess at t = 0, scanned over a fixed slope grid
    k_grid = np.linspace(0.0, 12.0, 481)
    intercepts = np.array([np.max(z - k * t) for k in k_grid])
    j = int(np.argmin(np.maximum(intercepts, 0.0) + 1e-3 * k_grid))
    k0 = float(k_grid[j])
    C_b = float(math.exp(max(intercepts[j], 0.0)))
    expo = k0 / (k0 + 1.0) if k0 > 0 else 0.0
    c_c = float(np.min((mb / ma) * np.exp(expo * t)))
    c_c = min(c_c, 1.0)
    return C_a, C_b, c_c, k0


def close_pair_check(field: AuxField, dist: DistanceField,
                     c0_list: Sequence[float] = (1.0, 2.0, 4.0)):
    """Largest ratio d(x, source)/C0 over nodes with |x - src|_inf m(x) <= C0.

    A single finite K over the catalog witnesses that metric balls of radius
    C0/m stay at bounded Agmon distance.
    """
    grid = field.grid
    nodes = grid.nodes()
    src = nodes[dist.source]
    sep = np.max(np.abs(nodes - src[None, :]), axis=1)
    prod = sep * field.values
    K = 0.0
    for c0 in c0_list:
        mask = (prod <= c0) & (sep > 0)
        if np.any(mask):
            K = max(K, float(np.max(dist.values[mask]) / c0))
    return K


# ---------------------------------------------------------------------------
# binary + CSV serialization (flat layout: header then node-major values)
# ---------------------------------------------------------------------------

_KIND_BYTES = 16


def save_field_binary(path, obj) -> None:
    grid = obj.grid
    kind = obj.kind.encode()[:_KIND_BYTES].ljust(_KIND_BYTES, b"\0")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", grid.n, 1))
        fh.write(struct.pack("<dd", grid.L, grid.h))
        fh.write(kind)
        fh.write(np.asarray(obj.values, dtype="<f8").tobytes())


def load_field_binary(path) -> AuxField:
    with open(path, "rb") as fh:
        n, _d = struct.unpack("<ii", fh.read(8))
        L, h = struct.unpack("<dd", fh.read(16))
        kind = fh.read(_KIND_BYTES).rstrip(b"\0").decode()
        data = np.frombuffer(fh.read(), dtype="<f8")
    m = int(round(2.0 * L / h))
    grid = BoxGrid(L=L, m=m, n=n)
    return AuxField(grid=grid, values=data.copy(), kind=kind)


def field_to_csv(path, obj) -> None:
    grid = obj.grid
    nodes = grid.nodes()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cols = ",".join(f"x{i+1}" for i in range(grid.n))
        fh.write(f"{cols},value\n")
        for row, v in zip(nodes, obj.values):
            coords = ",".join(format(c, ".12g") for c in row)
            fh.write(f"{coords},{format(v, '.12g')}\n")
