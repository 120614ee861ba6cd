"""Cube geometry, adaptive tensor quadrature, scale-weighted averages,
reducing matrices, and the determinant inequalities.

All averaging in the laboratory happens over axis-aligned cubes Q(x, r)
with center x and half-side r (side length 2r).  The quadrature engine is a
composite tensor rule refined adaptively until two successive levels agree;
the exact even-moment integrals in :mod:`mwlab.weights` serve as an
independent cross-check, never as part of this code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, Degenerate, DomainError, QuadratureNonConvergence
from .weights import MatrixWeight, sqrt_psd, symmetrize

QUAD_TOL = 1e-6
MAX_LEVEL = 7
_CHUNK = 1 << 19  # nodes per evaluation chunk


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube Q(center, r): half-side r, side 2r, volume (2r)^n."""

    center: np.ndarray
    r: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)
        if not self.r > 0:
            raise ConfigError("cube half-side must be positive")

    @property
    def n(self) -> int:
        return self.center.shape[0]

    @property
    def volume(self) -> float:
        return (2.0 * self.r) ** self.n

    def contains_origin(self) -> bool:
        return bool(np.all(np.abs(self.center) <= self.r))

    def key(self) -> tuple:
        return (tuple(round(float(c), 12) for c in self.center), round(float(self.r), 12))


@dataclass(frozen=True)
class QuadratureRule:
    """Composite tensor rule: 2^level cells per axis, midpoint or 2-node Gauss."""

    level: int = 0
    scheme: str = "gauss-legendre-tensor"

    def __post_init__(self):
        if self.scheme not in ("midpoint-tensor", "gauss-legendre-tensor"):
            raise ConfigError(f"unknown quadrature scheme {self.scheme!r}")
        if self.level < 0:
            raise ConfigError("refinement level must be nonnegative")

    @property
    def nodes_per_cell(self) -> int:
        return 1 if self.scheme == "midpoint-tensor" else 2

    def nodes_per_axis(self) -> int:
        return (1 << self.level) * self.nodes_per_cell

    def axis_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on [-1, 1] for a single axis."""
        cells = 1 << self.level
        edges = np.linspace(-1.0, 1.0, cells + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 1.0 / cells
        if self.scheme == "midpoint-tensor":
            return mids, np.full(cells, 2.0 * half)
        off = half / math.sqrt(3.0)
        nodes = np.concatenate([mids - off, mids + off])
        order = np.argsort(nodes, kind="stable")
        return nodes[order], np.full(2 * cells, half)[order]


def _iter_tensor_chunks(cube: Cube, rule: QuadratureRule):
    """Yield (points (M, n), weights (M,)) chunks covering the tensor grid."""
    nodes, w1 = rule.axis_nodes()
    n = cube.n
    pts_axis = [cube.center[a] + cube.r * nodes for a in range(n)]
    wts_axis = [cube.r * w1 for _ in range(n)]
    m = nodes.shape[0]
    total = m ** n
    # split along the first axis so chunks stay below _CHUNK nodes
    per_slice = m ** (n - 1)
    step = max(1, _CHUNK // max(per_slice, 1))
    rest_pts = np.stack(np.meshgrid(*pts_axis[1:], indexing="ij"), axis=-1).reshape(-1, n - 1) \
        if n > 1 else np.zeros((1, 0))
    rest_w = np.ones(1)
    if n > 1:
        grids = np.meshgrid(*wts_axis[1:], indexing="ij")
        rest_w = np.ones_like(grids[0])
        for g in grids:
            rest_w = rest_w * g
        rest_w = rest_w.reshape(-1)
    for start in range(0, m, step):
        sl = slice(start, min(start + step, m))
        first = pts_axis[0][sl]
        k = first.shape[0]
        pts = np.empty((k * per_slice, n))
        pts[:, 0] = np.repeat(first, per_slice)
        if n > 1:
            pts[:, 1:] = np.tile(rest_pts, (k, 1))
        wts = np.repeat(wts_axis[0][sl], per_slice) * np.tile(rest_w, k)
        yield pts, wts


def integrate_fields(fn: Callable[[np.ndarray], np.ndarray], cube: Cube,
                     rule: QuadratureRule) -> np.ndarray:
    """Integrate a batched field fn(X (M, n)) -> (M, ...) over the cube."""
    acc = None
    for pts, wts in _iter_tensor_chunks(cube, rule):
        vals = np.asarray(fn(pts))
        contrib = np.tensordot(wts, vals, axes=(0, 0))
        acc = contrib if acc is None else acc + contrib
    return acc


def _pick_rule(W_singular: bool, cube: Cube, level: int, scheme: Optional[str]) -> QuadratureRule:
    # Cell-centered midpoint nodes never touch the origin on origin-covering
    # cubes, which is what integrable singularities need.
    if scheme is None:
        if W_singular and cube.contains_origin():
            return QuadratureRule(level=max(level, 1), scheme="midpoint-tensor")
        return QuadratureRule(level=level, scheme="gauss-legendre-tensor")
    return QuadratureRule(level=level, scheme=scheme)


def adaptive_integrate(fn, cube: Cube, *, singular: bool = False,
                       scheme: Optional[str] = None, tol: float = QUAD_TOL,
                       max_level: int = MAX_LEVEL, start_level: int = 1,
                       strict: bool = True, return_growth: bool = False):
    """Refine the tensor rule until two successive levels agree to ``tol``.

    Returns (value, converged), and with ``return_growth`` also the final
    level-to-level magnitude ratio (a ratio staying above 1 signals a
    divergent integrand).  With strict=True a disagreement at ``max_level``
    raises QuadratureNonConvergence.
    """
    prev = None
    growth = 1.0
    for level in range(start_level, max_level + 1):
        rule = _pick_rule(singular, cube, level, scheme)
        val = integrate_fields(fn, cube, rule)
        if prev is not None:
            num = np.max(np.abs(val - prev))
            den = max(np.max(np.abs(val)), 1e-300)
            growth = np.max(np.abs(val)) / max(np.max(np.abs(prev)), 1e-300)
            if num <= tol * den:
                return (val, True, growth) if return_growth else (val, True)
        prev = val
    if strict:
        raise QuadratureNonConvergence(
            f"quadrature did not stabilize to {tol:g} by level {max_level} "
            f"on cube center={cube.center}, r={cube.r}")
    return (prev, False, growth) if return_growth else (prev, False)


def average(W: MatrixWeight, Q: Cube, rule: Optional[QuadratureRule] = None,
            tol: float = QUAD_TOL, max_level: int = MAX_LEVEL) -> np.ndarray:
    """Mean of the matrix weight over the cube (the barred integral).

    With an explicit rule the single-level tensor sum is returned; otherwise
    the level adapts until successive refinements agree to ``tol`` relative.
    """
    if rule is not None:
        total = integrate_fields(W.eval_many, Q, rule)
    else:
        total, _ = adaptive_integrate(W.eval_many, Q, singular=W.singular_at_origin,
                                      tol=tol, max_level=max_level)
    return symmetrize(total) / Q.volume


def psi(W: MatrixWeight, x, r: float, *, method: str = "quadrature",
        tol: float = QUAD_TOL, max_level: int = MAX_LEVEL) -> np.ndarray:
    """Scale-weighted cube average r^(2-n) * int_{Q(x,r)} W.

    ``method`` selects the route: "quadrature" (the contract), "exact"
    (closed-form cube integrals, available for the polynomial catalog), or
    "auto" (exact when available, quadrature otherwise).
    """
    x = np.asarray(x, dtype=float)
    n = W.n
    if n < 3:
        raise DomainError("scale-weighted averages require ambient dimension >= 3")
    if r <= 0:
        raise DomainError("radius must be positive")
    if method in ("exact", "auto"):
        exact = W.exact_cube_integral(x, r)
        if exact is not None:
            return symmetrize(exact) * r ** (2 - n)
        if method == "exact":
            raise ConfigError("no closed-form cube integral for this weight")
    Q = Cube(center=x, r=r)
    return average(W, Q, tol=tol, max_level=max_level) * Q.volume * r ** (2 - n)


def psi_many(W: MatrixWeight, X: np.ndarray, r) -> Optional[np.ndarray]:
    """Vectorized exact psi over many centers; None when no closed form exists.

    ``r`` may be a scalar or a per-center array.
    """
    n = W.n
    ints = W.exact_cube_integral_many(X, r)
    if ints is None:
        return None
    scale = np.asarray(r, dtype=float) ** (2 - n)
    if scale.ndim:
        return symmetrize(ints) * scale[:, None, None]
    return symmetrize(ints) * scale


# ---------------------------------------------------------------------------
# cube families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubeFamily:
    """Finite surrogate for "every cube": dyadic grid or random log-uniform.

    Families are nested under :meth:`refine`, which halves r_min and (for the
    random generator) appends freshly drawn cubes, so max-type constant
    estimates are monotone along refinements.
    """

    generator: str = "dyadic"
    box: float = 8.0
    count: int = 24
    r_min: float = 0.5
    r_max: float = 4.0
    seed: int = 1
    n: int = 3

    def __post_init__(self):
        if self.generator not in ("dyadic", "random"):
            raise ConfigError(f"unknown cube family generator {self.generator!r}")
        if not (0 < self.r_min <= self.r_max <= self.box):
            raise ConfigError("need 0 < r_min <= r_max <= box")

    def _levels(self) -> list[float]:
        levels = []
        r = self.r_max
        while r >= self.r_min * (1 - 1e-12):
            levels.append(r)
            r /= 2.0
        return levels

    @property
    def per_level(self) -> int:
        return max(1, self.count // max(len(self._levels()), 1))

    def cubes(self) -> list[Cube]:
        # built level by level so that refinements (which only append a finer
        # level) extend the family without reshuffling existing cubes
        out: list[Cube] = []
        per_level = self.per_level
        for li, r in enumerate(self._levels()):
            if self.generator == "dyadic":
                m = max(1, int(self.box // r))
                centers = [(-self.box + (2 * i + 1) * r) for i in range(m)]
                grid = [np.array(c) for c in _lattice(centers, self.n)]
                stride = max(1, len(grid) // per_level)
                out.extend(Cube(center=g, r=r) for g in grid[::stride][:per_level])
            else:
                rng = np.random.default_rng([self.seed, li])
                for _ in range(per_level):
                    rr = math.exp(rng.uniform(math.log(r / 2.0), math.log(r)))
                    c = rng.uniform(-self.box + rr, self.box - rr, size=self.n)
                    out.append(Cube(center=c, r=rr))
        return out

    def refine(self) -> "CubeFamily":
        per_level = self.per_level
        new_levels = len(self._levels()) + 1
        return CubeFamily(generator=self.generator, box=self.box,
                          count=per_level * new_levels, r_min=self.r_min / 2.0,
                          r_max=self.r_max, seed=self.seed, n=self.n)

    def to_config(self) -> dict:
        return {"generator": self.generator, "box": self.box, "count": self.count,
                "r_min": self.r_min, "r_max": self.r_max, "seed": self.seed, "n": self.n}

    @staticmethod
    def from_config(cfg: dict) -> "CubeFamily":
        return CubeFamily(**cfg)


def _lattice(centers_1d, n):
    if n == 1:
        return [(c,) for c in centers_1d]
    return [(c, *rest) for c in centers_1d for rest in _lattice(centers_1d, n - 1)]


# ---------------------------------------------------------------------------
# reducing matrices
# ---------------------------------------------------------------------------

def _sphere_directions(d: int, count: int, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def khachiyan_mvee_centered(points: np.ndarray, tol: float = 1e-6,
                            max_iter: int = 100000) -> np.ndarray:
    """Minimum-volume origin-centered ellipsoid {e : e^T M e <= 1} over +-points.

    Khachiyan's simplex iteration with Wolfe away steps (linear convergence,
    so the 1e-6 containment tolerance costs hundreds of iterations, not
    millions).  Returns M.
    """
    P = np.asarray(points, dtype=float)
    m, d = P.shape
    u = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        X = P.T @ (P * u[:, None])
        Xi = np.linalg.inv(X)
        kappa = np.einsum("mi,ij,mj->m", P, Xi, P)
        j_add = int(np.argmax(kappa))
        k_add = kappa[j_add]
        support = u > 1e-14
        j_away = int(np.argmin(np.where(support, kappa, np.inf)))
        k_away = kappa[j_away]
        if k_add <= d * (1.0 + tol):
            break
        if k_add - d >= d - k_away:
            step = (k_add - d) / (d * (k_add - 1.0))
            u *= (1.0 - step)
            u[j_add] += step
        else:
            step = (d - k_away) / (d * (k_away - 1.0))
            step = min(step, u[j_away] / (1.0 - u[j_away]))
            u *= (1.0 + step)
            u[j_away] -= step
    X = P.T @ (P * u[:, None])
    return np.linalg.inv(X) / d


def reducing_matrix(W: MatrixWeight, Q: Cube, p: float, *,
                    directions: int = 0, tol: float = QUAD_TOL,
                    seed: int = 7) -> np.ndarray:
    """Positive definite R with N(e) <= |R e| <= sqrt(d) N(e) for the
    direction-averaged norm N(e) = (avg_Q |W^{1/p} e|^p)^(1/p).

    p = 2 has the closed form (avg_Q W)^{1/2}.  For general p the sampled
    unit ball of N is wrapped in its minimum-volume enclosing ellipsoid; the
    John factor sqrt(d) absorbs the sampling slack.
    """
    if p < 1:
        raise ConfigError("reducing matrices need p >= 1")
    d = W.d
    if p == 2:
        return sqrt_psd(average(W, Q, tol=tol))
    count = max(directions, 64 * d)
    dirs = np.concatenate([np.eye(d), _sphere_directions(d, count, seed=seed)])

    def qforms(X):
        # |W^(1/p) e|^p = (e^T W^(2/p) e)^(p/2), via the eigendecomposition
        w, v = np.linalg.eigh(W.eval_many(X))
        wp = np.clip(w, 0.0, None) ** (2.0 / p)
        fr = np.einsum("mik,mk,mjk->mij", v, wp, v)
        q = np.einsum("mij,ki,kj->mk", fr, dirs, dirs)
        return np.clip(q, 0.0, None) ** (p / 2.0)

    integ, _ = adaptive_integrate(qforms, Q, singular=W.singular_at_origin,
                                  tol=tol, strict=False)
    norms = (integ / Q.volume) ** (1.0 / p)
    if norms.min() <= 1e-14:
        raise Degenerate("norm functional vanished along a sampled direction")
    boundary = dirs / norms[:, None]
    M = khachiyan_mvee_centered(np.concatenate([boundary, -boundary]))
    return symmetrize(math.sqrt(d) * sqrt_psd(M))


def directional_p_norm(W: MatrixWeight, Q: Cube, e: np.ndarray, p: float,
                       tol: float = QUAD_TOL) -> float:
    """(avg_Q |W^{1/p} e|^p)^{1/p} for a single direction (test oracle hook)."""
    e = np.asarray(e, dtype=float)

    def fn(X):
        w, v = np.linalg.eigh(W.eval_many(X))
        wp = np.clip(w, 0.0, None) ** (2.0 / p)
        fr = np.einsum("mik,mk,mjk->mij", v, wp, v)
        q = np.einsum("mij,i,j->m", fr, e, e)
        return np.clip(q, 0.0, None) ** (p / 2.0)

    integ, _ = adaptive_integrate(fn, Q, singular=W.singular_at_origin, tol=tol,
                                  strict=False)
    return float((integ / Q.volume) ** (1.0 / p))


# ---------------------------------------------------------------------------
# determinant inequalities
# ---------------------------------------------------------------------------

def check_matrix_jensen(W: MatrixWeight, Q: Cube, tol: float = QUAD_TOL):
    """det(avg_Q W) >= exp(avg_Q ln det W), checked by quadrature.

    Returns (lhs, rhs, pass).  DomainError when det W <= 0 on a node.
    """
    lhs = float(np.linalg.det(average(W, Q, tol=tol)))

    def logdets(X):
        vals = W.eval_many(X)
        dets = np.linalg.det(vals)
        if np.any(dets <= 0.0):
            raise DomainError("det W <= 0 at a quadrature node; Jensen check needs "
                              "a positive definite weight")
        return np.log(dets)

    integ, _ = adaptive_integrate(logdets, Q, singular=W.singular_at_origin,
                                  tol=tol, strict=False)
    rhs = float(np.exp(integ / Q.volume))
    return lhs, rhs, bool(lhs >= rhs * (1.0 - tol))


def check_hadamard(M: np.ndarray, basis: np.ndarray, slack: float = 1e-12) -> bool:
    """det M <= prod_j <M e_j, e_j> <= prod_j |M e_j| for an orthonormal basis."""
    M = symmetrize(np.asarray(M, dtype=float))
    B = np.asarray(basis, dtype=float)
    if np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) > 1e-12:
        raise ConfigError("basis is not orthonormal to 1e-12")
    det = float(np.linalg.det(M))
    quad = float(np.prod(np.einsum("ij,kj,ki->k", M, B, B)))
    norms = float(np.prod(np.linalg.norm(B @ M, axis=1)))
    scale = max(abs(det), abs(quad), abs(norms), 1.0)
    return bool(det <= quad + slack * scale and quad <= norms + slack * scale)
