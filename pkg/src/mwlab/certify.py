"""Finite-family certifiers for the matrix weight classes.

Each certifier sweeps a cube family, reduces per-cube quantities by max or
min, and returns a :class:`CertReport` carrying the constant estimate, the
worst cube (witness), and an operational pass verdict.  Finite families
cannot certify a supremum over all cubes, so "pass" for unbounded-constant
classes means the estimate stays stable (<10% growth per step) across three
nested family refinements.

Certified classes and their constants:

* reverse Hoelder (``bp``): directional p-average vs average quadratic form;
* its determinant twin (``bp-det``) through reducing matrices;
* nondegeneracy (``nd``): smallest eigenvalue of cube integrals;
* quantile A-infinity (``ainf``): delta(eps) profiles;
* determinant A-infinity (``a2inf``) and its p-power variant (``apinf``);
* noncommutativity (``nc``): sandwiched averages at critical scale;
* reverse Brunn-Minkowski (``rbm``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import auxmetric
from .cubature import (Cube, CubeFamily, adaptive_integrate,
                       khachiyan_mvee_centered)
from .errors import ConfigError, Degenerate, DomainError, SingularSample
from .weights import (MatrixWeight, cube_even_moments, inv_psd, sqrt_psd,
                      sqrt_psd_many, symmetrize, TOL_EIG)

CERT_TOL = 1e-4          # quadrature tolerance inside certifier sweeps
CERT_MAX_LEVEL = 5       # refinement cap for certifier quadrature
GROWTH_BUDGET = 0.10     # operational stability margin per family refinement
NC_FLOOR = 1e-3
RANDOM_DIRECTIONS = 32


@dataclass
class CertReport:
    """Outcome of one certifier sweep (possibly with nested refinements)."""

    class_name: str
    constant_estimate: float
    family: dict
    witness: dict
    passed: bool
    mode: str = ""
    details: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "class": self.class_name,
            "constant_estimate": self.constant_estimate,
            "family": self.family,
            "witness": self.witness,
            "passed": bool(self.passed),
            "mode": self.mode,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# scalarizing adapters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _EigScalarWeight(MatrixWeight):
    """1x1 weight tracking an eigenvalue (min or max) of a base weight."""

    base: MatrixWeight
    which: str = "min"

    def __post_init__(self):
        object.__setattr__(self, "n", self.base.n)
        object.__setattr__(self, "d", 1)

    @property
    def singular_at_origin(self):
        return self.base.singular_at_origin

    def eval_many(self, X):
        vals = self.base.eval_many(X)
        if vals.shape[1] == 2:
            # closed-form 2x2 eigenvalues beat batched LAPACK by a wide margin
            tr = vals[:, 0, 0] + vals[:, 1, 1]
            det = vals[:, 0, 0] * vals[:, 1, 1] - vals[:, 0, 1] * vals[:, 1, 0]
            disc = np.sqrt(np.clip(tr * tr - 4.0 * det, 0.0, None))
            col = 0.5 * (tr - disc) if self.which == "min" else 0.5 * (tr + disc)
        else:
            lam = np.linalg.eigvalsh(vals)
            col = lam[:, 0] if self.which == "min" else lam[:, -1]
        return col[:, None, None]

    def _eig_radial_poly(self):
        from .weights import (ConstantWeight, NormDiagWeight,
                              ScalarDiagWeight)
        if self.which == "max":
            return NormDiagWeight(base=self.base)._dominant_entry_poly()
        if isinstance(self.base, ScalarDiagWeight):
            polys = [v.radial_poly() for v in self.base.entries]
            if any(p is None for p in polys):
                return None
            kmax = max(len(p) for p in polys)
            padded = [np.pad(p, (0, kmax - len(p))) for p in polys]
            for cand in padded:
                if all(np.all(q - cand >= 0) for q in padded):
                    return cand
            return None
        if isinstance(self.base, ConstantWeight):
            return np.array([float(np.linalg.eigvalsh(self.base.mat)[0])])
        return None

    def qform_radial_poly(self, e):
        poly = self._eig_radial_poly()
        if poly is None:
            return None
        return float(np.dot(e, e)) * poly

    def exact_cube_integral_many(self, centers, r):
        from .weights import radial_poly_cube_integral_many
        poly = self._eig_radial_poly()
        if poly is None:
            return None
        return radial_poly_cube_integral_many(poly, centers, r)[:, None, None]

    def to_config(self):
        return {"kind": f"eig_{self.which}", "n": self.n, "d": 1,
                "base": self.base.to_config()}


@dataclass(frozen=True)
class _DetRootWeight(MatrixWeight):
    """1x1 weight det(V)^(1/d) of a base weight."""

    base: MatrixWeight

    def __post_init__(self):
        object.__setattr__(self, "n", self.base.n)
        object.__setattr__(self, "d", 1)

    @property
    def singular_at_origin(self):
        return self.base.singular_at_origin

    def eval_many(self, X):
        dets = _safe_dets(self.base.eval_many(X))
        return (np.clip(dets, 0.0, None) ** (1.0 / self.base.d))[:, None, None]

    def _root_poly(self):
        # det^(1/d) stays a radial monomial when det is c * s^k with d | k
        from .weights import det_radial_poly
        poly = det_radial_poly(self.base)
        if poly is None:
            return None
        nz = np.nonzero(np.abs(poly) > 0)[0]
        if len(nz) != 1:
            return np.array([0.0]) if len(nz) == 0 else None
        k = int(nz[0])
        if k % self.base.d:
            return None
        out = np.zeros(k // self.base.d + 1)
        out[-1] = float(poly[k]) ** (1.0 / self.base.d)
        return out

    def qform_radial_poly(self, e):
        poly = self._root_poly()
        if poly is None:
            return None
        return float(np.dot(e, e)) * poly

    def exact_cube_integral_many(self, centers, r):
        from .weights import radial_poly_cube_integral_many
        poly = self._root_poly()
        if poly is None:
            return None
        return radial_poly_cube_integral_many(poly, centers, r)[:, None, None]

    def to_config(self):
        return {"kind": "det_root", "n": self.n, "d": 1, "base": self.base.to_config()}


@dataclass(frozen=True)
class _MatrixPowerWeight(MatrixWeight):
    """V^p through the eigendecomposition, for the determinant certifiers."""

    base: MatrixWeight
    p: float

    def __post_init__(self):
        object.__setattr__(self, "n", self.base.n)
        object.__setattr__(self, "d", self.base.d)

    @property
    def singular_at_origin(self):
        return self.base.singular_at_origin

    def eval_many(self, X):
        w, v = np.linalg.eigh(self.base.eval_many(X))
        w = np.clip(w, 0.0, None) ** self.p
        return np.einsum("mik,mk,mjk->mij", v, w, v)

    def to_config(self):
        return {"kind": "matrix_power", "p": self.p, "n": self.n, "d": self.d,
                "base": self.base.to_config()}


# ---------------------------------------------------------------------------
# per-cube evaluators (shared by sweeps and witness replay)
# ---------------------------------------------------------------------------


def _avg(W: MatrixWeight, cube: Cube, tol: float) -> np.ndarray:
    """Certifier-grade cube mean: adaptive quadrature, last level on overrun."""
    exact = W.exact_cube_integral_many(cube.center[None, :], cube.r)
    if exact is not None:
        return symmetrize(exact[0]) / cube.volume
    total, _ = adaptive_integrate(W.eval_many, cube, singular=W.singular_at_origin,
                                  tol=tol, max_level=CERT_MAX_LEVEL + 1, strict=False)
    return symmetrize(np.atleast_2d(total.reshape(W.d, W.d))) / cube.volume


DIVERGENCE_GROWTH = 1.05   # level-to-level growth flagging a divergent integral


def _safe_dets(vals: np.ndarray) -> np.ndarray:
    """Determinants with a relative floor: analytic zeros stay zero instead
    of turning into pivoting roundoff."""
    if vals.shape[1] == 2:
        dets = vals[:, 0, 0] * vals[:, 1, 1] - vals[:, 0, 1] * vals[:, 1, 0]
    else:
        dets = np.linalg.det(vals)
    scale = np.einsum("mii->m", vals) ** vals.shape[1]
    return np.where(np.abs(dets) <= 1e-12 * np.abs(scale), 0.0, dets)


def _bp_directions(avg: np.ndarray, d: int, seed: int) -> np.ndarray:
    # eigenframe of the average plus random unit vectors guards both the
    # aligned extremal directions and everything in between
    _, vecs = np.linalg.eigh(avg)
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((RANDOM_DIRECTIONS, d))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    return np.concatenate([vecs.T, rand])


def _poly_pow(coeffs: np.ndarray, p: int) -> np.ndarray:
    out = np.array([1.0])
    for _ in range(p):
        out = np.convolve(out, coeffs)
    return out


def _directional_p_integrals(W: MatrixWeight, cube: Cube, dirs: np.ndarray,
                             p: float, tol: float) -> np.ndarray:
    """avg_Q <W e, e>^p for each row of ``dirs``.

    Exact through even radial moments when the quadratic forms are radial
    polynomials and p is an integer; adaptive quadrature otherwise.
    """
    if float(p).is_integer() and p >= 1:
        polys = [W.qform_radial_poly(e) for e in dirs]
        if all(q is not None for q in polys):
            powed = [_poly_pow(np.asarray(q, dtype=float), int(p)) for q in polys]
            kmax = max(len(c) for c in powed)
            mom = cube_even_moments(cube.center, cube.r, kmax - 1)
            vals = np.array([float(np.dot(c, mom[: len(c)])) for c in powed])
            return vals / cube.volume

    def fn(X):
        vals = W.eval_many(X)
        q = np.einsum("mij,ki,kj->mk", vals, dirs, dirs)
        return np.clip(q, 0.0, None) ** p

    integ, converged, growth = adaptive_integrate(
        fn, cube, singular=W.singular_at_origin, tol=tol,
        max_level=CERT_MAX_LEVEL, strict=False, return_growth=True)
    if not converged and growth > DIVERGENCE_GROWTH:
        # refinements keep growing: the p-th power is not integrable on this
        # cube and the honest average is infinite
        return np.full(len(dirs), np.inf)
    return integ / cube.volume


def _bp_cube(W: MatrixWeight, p: float, cube: Cube, tol: float, seed: int,
             direction: Optional[np.ndarray] = None):
    avg = _avg(W, cube, tol)
    dirs = direction[None, :] if direction is not None else _bp_directions(avg, W.d, seed)
    dens = np.einsum("ij,ki,kj->k", avg, dirs, dirs)
    if dens.min() < 1e-14:
        raise Degenerate("average quadratic form vanished along a sampled direction")
    nums = _directional_p_integrals(W, cube, dirs, p, tol) ** (1.0 / p)
    ratios = nums / dens
    k = int(np.argmax(ratios))
    return float(ratios[k]), dirs[k]


def reducing_matrix_qform(W: MatrixWeight, cube: Cube, p: float, tol: float = CERT_TOL,
                          seed: int = 7) -> np.ndarray:
    """Reducing matrix of V^p at exponent 2p: wraps the norm
    e -> (avg <V e, e>^p)^(1/(2p)) in its John ellipsoid."""
    d = W.d
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((64 * d, d))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    dirs = np.concatenate([np.eye(d), rand])
    norms = _directional_p_integrals(W, cube, dirs, p, tol) ** (1.0 / (2.0 * p))
    if not np.all(np.isfinite(norms)):
        raise Degenerate("p-norm functional diverges on this cube")
    if norms.min() <= 1e-14:
        raise Degenerate("p-norm functional vanished along a sampled direction")
    boundary = dirs / norms[:, None]
    M = khachiyan_mvee_centered(np.concatenate([boundary, -boundary]))
    return symmetrize(math.sqrt(d) * sqrt_psd(M))


def _bp_det_cube(W: MatrixWeight, p: float, cube: Cube, tol: float, seed: int) -> float:
    R = reducing_matrix_qform(W, cube, p, tol=tol, seed=seed)
    avg = _avg(W, cube, tol)
    den = math.sqrt(max(float(np.linalg.det(avg)), 0.0))
    if den <= 1e-300:
        raise Degenerate("average has vanishing determinant")
    return float(np.linalg.det(R)) / den


def _nd_cube(W: MatrixWeight, cube: Cube, tol: float):
    avg = _avg(W, cube, tol)
    integ = avg * cube.volume
    lam = np.linalg.eigvalsh(integ)
    floor = 1e-12 * cube.volume * float(np.trace(avg)) / W.d
    return float(lam[0]), floor


def _log_det_average(W: MatrixWeight, cube: Cube, tol: float) -> float:
    bad_frac = 0.0

    def fn(X):
        dets = _safe_dets(W.eval_many(X))
        nonlocal bad_frac
        bad = dets <= 0.0
        if np.any(bad):
            bad_frac = max(bad_frac, float(np.mean(bad)))
            if bad_frac > 0.005:
                raise DomainError("det W <= 0 on a positive fraction of nodes")
            dets = np.where(bad, np.nan, dets)
        out = np.log(dets)
        return np.nan_to_num(out, nan=0.0)

    integ, _ = adaptive_integrate(fn, cube, singular=W.singular_at_origin,
                                  tol=max(tol, 1e-3), max_level=CERT_MAX_LEVEL,
                                  strict=False)
    return float(integ / cube.volume)


def _a2inf_cube(W: MatrixWeight, cube: Cube, tol: float) -> float:
    avg = _avg(W, cube, tol)
    det = float(np.linalg.det(avg))
    mean_log = _log_det_average(W, cube, tol)
    return det / math.exp(mean_log)


def _apinf_cube(W: MatrixWeight, p: float, cube: Cube, tol: float, seed: int) -> float:
    # determinant condition for V^p at exponent 2p:
    # det R_Q^{2p}(V^p) <= A * exp(avg ln det V^{1/2})
    R = reducing_matrix_qform(W, cube, p, tol=tol, seed=seed)
    mean_log = _log_det_average(W, cube, tol)
    return float(np.linalg.det(R)) / math.exp(0.5 * mean_log)


def _rbm_cube(W: MatrixWeight, cube: Cube, tol: float) -> float:
    avg = _avg(W, cube, tol)
    det = max(float(np.linalg.det(avg)), 0.0)
    lhs = det ** (1.0 / W.d)

    def fn(X):
        dets = _safe_dets(W.eval_many(X))
        if np.any(dets < 0.0):
            raise DomainError("negative determinant at a quadrature node")
        return dets ** (1.0 / W.d)

    integ, _ = adaptive_integrate(fn, cube, singular=W.singular_at_origin,
                                  tol=tol, max_level=CERT_MAX_LEVEL, strict=False)
    rhs = float(integ / cube.volume)
    if rhs <= 1e-300:
        return math.inf
    return lhs / rhs


def _ainf_cube(W: MatrixWeight, cube: Cube, eps_list: Sequence[float],
               sample_count: int, seed: int, strict: bool, tol: float):
    avg = _avg(W, cube, tol)
    try:
        root_inv = inv_psd(sqrt_psd(avg))
    except Exception as exc:
        raise Degenerate(f"cube average is singular: {exc}") from exc
    rng = np.random.default_rng(seed)
    X = cube.center[None, :] + cube.r * rng.uniform(-1.0, 1.0, size=(sample_count, cube.n))
    vals = W.eval_many(X)
    lam = np.linalg.eigvalsh(vals)
    scale = np.maximum(lam[:, -1], 1e-300)
    singular = lam[:, 0] <= TOL_EIG * scale
    frac = float(np.mean(singular))
    if strict and frac > 0.01:
        raise SingularSample(
            f"{100 * frac:.1f}% of in-cube samples are numerically singular")
    # s(x) = largest delta with V(x) >= delta * avg, via the generalized
    # eigenvalue; equals 1/|avg^(1/2) V(x)^(-1/2)|^2 at invertible samples
    sand = np.einsum("ij,mjk,kl->mil", root_inv, vals, root_inv)
    s = np.clip(np.linalg.eigvalsh(sand)[:, 0], 0.0, None)
    deltas = {float(e): float(np.quantile(s, float(e), method="lower"))
              for e in eps_list}
    return deltas, frac


def _critical_cube(W: MatrixWeight, x: np.ndarray) -> Cube:
    m_low = auxmetric.aux_value(W, x, kind="lower")
    return Cube(center=np.asarray(x, dtype=float), r=1.0 / m_low)


def _nc_cube(W: MatrixWeight, cube: Cube, tol: float) -> float:
    integ = _avg(W, cube, tol) * cube.volume
    B = inv_psd(integ)

    def fn(X):
        roots = sqrt_psd_many(W.eval_many(X))
        return np.einsum("mij,jk,mkl->mil", roots, B, roots)

    total, _ = adaptive_integrate(fn, cube, singular=W.singular_at_origin,
                                  tol=tol, max_level=CERT_MAX_LEVEL, strict=False)
    return float(np.linalg.eigvalsh(symmetrize(total))[0])


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep(kind: str, per_cube: Callable[[Cube], float], family: CubeFamily,
           reduce_max: bool = True):
    cubes = family.cubes()
    vals = [per_cube(c) for c in cubes]
    arr = np.asarray(vals, dtype=float)
    idx = int(np.argmax(arr)) if reduce_max else int(np.argmin(arr))
    return float(arr[idx]), cubes[idx], vals


def bp_constant(W: MatrixWeight, p: float, family: CubeFamily, *,
                tol: float = CERT_TOL, seed: int = 11,
                stability: bool = False) -> CertReport:
    """Reverse Hoelder constant: max over cubes and unit directions of
    (avg <We,e>^p)^(1/p) / <avg W e, e>."""
    if p <= 1:
        raise ConfigError("reverse Hoelder exponent must exceed 1")
    witness_dir = {}

    def per_cube(c: Cube) -> float:
        val, e = _bp_cube(W, p, c, tol, seed)
        witness_dir[c.key()] = e
        return val

    est, worst, vals = _sweep("bp", per_cube, family)
    report = CertReport(
        class_name="bp", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r,
                 "direction": witness_dir[worst.key()].tolist(), "value": est},
        passed=bool(np.isfinite(est)), mode=f"p={p}",
        details={"per_cube": vals, "p": p, "seed": seed})
    if stability:
        _apply_stability(report, lambda fam: bp_constant(W, p, fam, tol=tol, seed=seed),
                         family)
    return report


def bp_det_check(W: MatrixWeight, p: float, family: CubeFamily, *,
                 tol: float = CERT_TOL, seed: int = 11,
                 stability: bool = False) -> CertReport:
    """Determinant-route reverse Hoelder check via reducing matrices."""
    def per_cube(c: Cube) -> float:
        return _bp_det_cube(W, p, c, tol, seed)

    est, worst, vals = _sweep("bp-det", per_cube, family)
    report = CertReport(
        class_name="bp-det", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r, "value": est},
        passed=bool(np.isfinite(est)), mode=f"p={p}",
        details={"per_cube": vals, "p": p, "seed": seed})
    if stability:
        _apply_stability(report, lambda fam: bp_det_check(W, p, fam, tol=tol, seed=seed),
                         family)
    return report


def nd_check(W: MatrixWeight, family: CubeFamily, *, tol: float = CERT_TOL) -> CertReport:
    """Nondegeneracy: cube integrals must be positive definite (scale-aware floor)."""
    records = []

    def per_cube(c: Cube) -> float:
        lam, floor = _nd_cube(W, c, tol)
        records.append((lam, floor))
        return lam

    est, worst, vals = _sweep("nd", per_cube, family, reduce_max=False)
    passed = all(lam > floor for lam, floor in records)
    return CertReport(
        class_name="nd", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r, "value": est},
        passed=passed, details={"per_cube": vals})


def ainf_profile(W: MatrixWeight, eps_list: Sequence[float], family: CubeFamily, *,
                 sample_count: int = 4096, seed: int = 5, strict: bool = True,
                 tol: float = CERT_TOL, stability: bool = False) -> CertReport:
    """delta(eps) profile: per cube, the largest delta such that
    V(x) >= delta * (avg_Q V) off an eps-fraction of the cube."""
    eps_list = [float(e) for e in eps_list]
    profiles = {}
    sing = {}

    cubes = family.cubes()
    for c in cubes:
        deltas, frac = _ainf_cube(W, c, eps_list, sample_count, seed, strict, tol)
        profiles[c.key()] = deltas
        sing[c.key()] = frac
    delta_min = {e: min(profiles[c.key()][e] for c in cubes) for e in eps_list}
    worst = min(cubes, key=lambda c: min(profiles[c.key()].values()))
    est = min(delta_min.values())
    report = CertReport(
        class_name="ainf", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r,
                 "value": min(profiles[worst.key()].values())},
        passed=bool(est > 0.0),
        details={"delta": {str(e): delta_min[e] for e in eps_list},
                 "singular_fraction": max(sing.values()),
                 "sample_count": sample_count, "seed": seed})
    if stability:
        _apply_stability(report,
                         lambda fam: ainf_profile(W, eps_list, fam,
                                                  sample_count=sample_count,
                                                  seed=seed, strict=strict, tol=tol),
                         family, min_type=True)
    return report


def a2inf_constant(W: MatrixWeight, family: CubeFamily, *, tol: float = CERT_TOL,
                   stability: bool = False) -> CertReport:
    """Determinant A-infinity constant: max of det(avg) / exp(avg ln det)."""
    def per_cube(c: Cube) -> float:
        return _a2inf_cube(W, c, tol)

    est, worst, vals = _sweep("a2inf", per_cube, family)
    report = CertReport(
        class_name="a2inf", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r, "value": est},
        passed=bool(np.isfinite(est)),
        details={"per_cube": vals})
    if stability:
        _apply_stability(report, lambda fam: a2inf_constant(W, fam, tol=tol), family)
    return report


def apinf_constant(W: MatrixWeight, p: float, family: CubeFamily, *,
                   tol: float = CERT_TOL, seed: int = 11,
                   stability: bool = False) -> CertReport:
    """Determinant condition for the p-th power weight at exponent 2p."""
    def per_cube(c: Cube) -> float:
        return _apinf_cube(W, p, c, tol, seed)

    est, worst, vals = _sweep("apinf", per_cube, family)
    report = CertReport(
        class_name="apinf", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r, "value": est},
        passed=bool(np.isfinite(est)), mode=f"p={p}",
        details={"per_cube": vals, "p": p})
    if stability:
        _apply_stability(report, lambda fam: apinf_constant(W, p, fam, tol=tol,
                                                            seed=seed), family)
    return report


def rbm_constant(W: MatrixWeight, family: CubeFamily, *, tol: float = CERT_TOL,
                 stability: bool = False) -> CertReport:
    """Reverse Brunn-Minkowski constant: max of det(avg)^(1/d) / avg(det^(1/d))."""
    def per_cube(c: Cube) -> float:
        return _rbm_cube(W, c, tol)

    est, worst, vals = _sweep("rbm", per_cube, family)
    report = CertReport(
        class_name="rbm", constant_estimate=est, family=family.to_config(),
        witness={"center": worst.center.tolist(), "r": worst.r, "value": est},
        passed=bool(np.isfinite(est)),
        details={"per_cube": vals})
    if stability:
        _apply_stability(report, lambda fam: rbm_constant(W, fam, tol=tol), family)
    return report


def nc_constant(W: MatrixWeight, centers: Optional[Sequence] = None,
                mode: str = "critical-scale", *, family: Optional[CubeFamily] = None,
                floor: float = NC_FLOOR, tol: float = CERT_TOL) -> CertReport:
    """Noncommutativity witness: min over cubes of the smallest eigenvalue of
    int_Q V^(1/2) (int_Q V)^(-1) V^(1/2).

    Default mode evaluates at critical-scale cubes Q(x, 1/m_lower(x)); the
    all-cubes mode sweeps a family instead.
    """
    if mode == "critical-scale":
        if centers is None:
            raise ConfigError("critical-scale mode needs centers")
        cubes = [_critical_cube(W, np.asarray(x, dtype=float)) for x in centers]
        fam_desc = {"mode": "critical-scale",
                    "centers": [np.asarray(x, dtype=float).tolist() for x in centers]}
    elif mode == "all-cubes":
        if family is None:
            raise ConfigError("all-cubes mode needs a cube family")
        cubes = family.cubes()
        fam_desc = {"mode": "all-cubes", **family.to_config()}
    else:
        raise ConfigError(f"unknown nc mode {mode!r}")
    vals = [_nc_cube(W, c, tol) for c in cubes]
    arr = np.asarray(vals)
    idx = int(np.argmin(arr))
    worst = cubes[idx]
    return CertReport(
        class_name="nc", constant_estimate=float(arr[idx]), family=fam_desc,
        witness={"center": worst.center.tolist(), "r": worst.r, "value": float(arr[idx])},
        passed=bool(arr[idx] >= floor), mode=mode,
        details={"per_cube": vals, "floor": floor})


def _apply_stability(report: CertReport, runner: Callable[[CubeFamily], CertReport],
                     family: CubeFamily, min_type: bool = False,
                     refinements: int = 2, budget: float = GROWTH_BUDGET):
    """Operational pass: re-run on nested refinements; a max-type estimate may
    grow by at most ``budget`` per step (min-type: shrink)."""
    estimates = [report.constant_estimate]
    fam = family
    for _ in range(refinements):
        fam = fam.refine()
        estimates.append(runner(fam).constant_estimate)
    ok = True
    for a, b in zip(estimates, estimates[1:]):
        if min_type:
            ok = ok and (b >= a * (1.0 - budget) - 1e-300)
        else:
            ok = ok and (b <= a * (1.0 + budget) + 1e-300)
    report.details["stability_estimates"] = estimates
    report.passed = bool(report.passed and ok and np.isfinite(estimates[-1]))
    report.constant_estimate = float(estimates[-1])


def replay_witness(W: MatrixWeight, report: CertReport, *, tol: float = CERT_TOL,
                   seed: int = 11) -> float:
    """Recompute the witness value recorded in a report (determinism check)."""
    cube = Cube(center=np.asarray(report.witness["center"]), r=report.witness["r"])
    name = report.class_name
    if name == "bp":
        p = report.details["p"]
        e = np.asarray(report.witness["direction"])
        val, _ = _bp_cube(W, p, cube, tol, seed, direction=e)
        return val
    if name == "bp-det":
        return _bp_det_cube(W, report.details["p"], cube, tol, seed)
    if name == "nd":
        return _nd_cube(W, cube, tol)[0]
    if name == "a2inf":
        return _a2inf_cube(W, cube, tol)
    if name == "apinf":
        return _apinf_cube(W, report.details["p"], cube, tol, seed)
    if name == "rbm":
        return _rbm_cube(W, cube, tol)
    if name == "nc":
        return _nc_cube(W, cube, tol)
    raise ConfigError(f"no replay route for class {name!r}")


# ---------------------------------------------------------------------------
# cross-class implications
# ---------------------------------------------------------------------------

def _try(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs), None
    except (DomainError, Degenerate, SingularSample) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def cross_checks(W: MatrixWeight, p: float, family: CubeFamily, *,
                 eps_list: Sequence[float] = (0.1, 0.25, 0.5),
                 nc_centers: Optional[Sequence] = None,
                 tol: float = CERT_TOL, seed: int = 11) -> dict:
    """Run the implied-membership matrix on one weight and record agreements.

    (i)   membership in the matrix reverse Hoelder class forces the largest
          eigenvalue into the scalar class, with constant <= d^(3-1/p) C;
    (ii)  adding the quantile A-infinity condition forces the smallest
          eigenvalue in as well;
    (iii) determinant A-infinity, the quantile profile, and
          (reverse Brunn-Minkowski + scalar A-infinity of det^(1/d)) agree
          for nondegenerate weights;
    (iv)  the p-power determinant condition holds iff both the determinant
          A-infinity and reverse Hoelder conditions hold.

    Disagreements are recorded, never raised.
    """
    d = W.d
    reports: dict = {}
    failures: dict = {}

    def run(name, fn, *args, **kwargs):
        rep, err = _try(fn, *args, **kwargs)
        reports[name] = rep
        if err is not None:
            failures[name] = err
        return rep

    run("bp", bp_constant, W, p, family, tol=tol, seed=seed, stability=True)
    run("bp_det", bp_det_check, W, p, family, tol=tol, seed=seed, stability=True)
    run("nd", nd_check, W, family, tol=tol)
    run("ainf", ainf_profile, W, eps_list, family, tol=tol, stability=True)
    run("a2inf", a2inf_constant, W, family, tol=tol, stability=True)
    run("apinf", apinf_constant, W, p, family, tol=tol, seed=seed, stability=True)
    run("rbm", rbm_constant, W, family, tol=tol, stability=True)
    run("lmax_bp", bp_constant, _EigScalarWeight(W, "max"), p, family,
        tol=tol, seed=seed, stability=True)
    run("detroot_a2inf", a2inf_constant, _DetRootWeight(W), family,
        tol=tol, stability=True)
    if nc_centers is None:
        cubes = sorted(family.cubes(), key=lambda c: -np.linalg.norm(c.center))
        nc_centers = [c.center for c in cubes[:4]] + [np.zeros(W.n)]
    run("nc", nc_constant, W, nc_centers, "critical-scale", tol=tol)

    def ok(name):
        rep = reports.get(name)
        return bool(rep is not None and rep.passed)

    checks = {}
    disagreements = []

    # (i) matrix class membership pushes the largest eigenvalue to the scalar class
    if ok("bp"):
        bound = d ** (3.0 - 1.0 / p) * reports["bp"].constant_estimate
        got = reports["lmax_bp"].constant_estimate if reports["lmax_bp"] else math.inf
        checks["norm_bp"] = {"holds": bool(ok("lmax_bp") and got <= bound * (1 + tol)),
                             "estimate": got, "bound": bound}
        if not checks["norm_bp"]["holds"]:
            disagreements.append("norm_bp")

    # (ii) smallest eigenvalue inherits the scalar class under A-infinity
    if ok("bp") and ok("ainf"):
        rep = run("lmin_bp", bp_constant, _EigScalarWeight(W, "min"), p, family,
                  tol=tol, seed=seed, stability=True)
        checks["lmin_bp"] = {"holds": bool(rep is not None and rep.passed),
                             "estimate": rep.constant_estimate if rep else math.inf}
        if not checks["lmin_bp"]["holds"]:
            disagreements.append("lmin_bp")

    # (iii) three equivalent faces of A-infinity for nondegenerate weights
    if ok("nd"):
        faces = {"a2inf": ok("a2inf"), "ainf": ok("ainf"),
                 "rbm_and_detroot": ok("rbm") and ok("detroot_a2inf")}
        agree = len(set(faces.values())) == 1
        checks["ainf_equiv"] = {"holds": agree, **faces}
        if not agree:
            disagreements.append("ainf_equiv")

    # (iv) p-power determinant condition vs (a2inf and bp)
    lhs = ok("apinf")
    rhs = ok("a2inf") and ok("bp")
    checks["power_equiv"] = {"holds": lhs == rhs, "apinf": lhs, "a2inf_and_bp": rhs}
    if not checks["power_equiv"]["holds"]:
        disagreements.append("power_equiv")

    # determinant route of the reverse Hoelder class: finiteness must agree
    # with the quadratic-form route on the same family
    if reports.get("bp") is not None and reports.get("bp_det") is not None:
        fin_bp = math.isfinite(reports["bp"].constant_estimate)
        fin_det = math.isfinite(reports["bp_det"].constant_estimate)
        checks["det_equiv"] = {"holds": fin_bp == fin_det,
                               "bp_finite": fin_bp, "bp_det_finite": fin_det}
        if not checks["det_equiv"]["holds"]:
            disagreements.append("det_equiv")

    return {"weight": W.to_config(), "p": p,
            "reports": {k: (v.to_jsonable() if v is not None else None)
                        for k, v in reports.items()},
            "errors": failures, "checks": checks, "disagreements": disagreements}
