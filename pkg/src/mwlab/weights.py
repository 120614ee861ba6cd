"""Catalog of evaluable matrix weights and the PSD matrix algebra they rely on.

A matrix weight is a symmetric positive semidefinite d x d matrix field on
R^n with an analytic descriptor.  Every weight in the catalog evaluates
pointwise and in batch, serializes to a JSON descriptor, and (where the
descriptor allows it) integrates exactly over axis-aligned cubes via even
radial moments.  Exact integrals are a fast path; the quadrature route in
:mod:`mwlab.cubature` remains the generic contract and the two are tested
against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NotPSD, ConfigError

# Relative eigenvalue tolerance for "numerically PSD": lambda_min may dip to
# -TOL_EIG * lambda_max before we refuse, and anything negative above that
# threshold is clamped to zero.  Double-precision eigensolver noise sits
# comfortably below this.
TOL_EIG = 1e-10


# ---------------------------------------------------------------------------
# symmetric PSD matrix algebra (the SymMat operations)
# ---------------------------------------------------------------------------

def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the exactly symmetric part of ``m`` (bitwise-symmetric storage)."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _clamped_eigh(m: np.ndarray, tol: float = TOL_EIG):
    """Eigendecomposition with tiny negative eigenvalues clamped to zero.

    Raises NotPSD when lambda_min < -tol * lambda_max.
    """
    w, v = np.linalg.eigh(symmetrize(np.asarray(m, dtype=float)))
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    bad = w < -tol * np.maximum(scale, 1e-300)
    if np.any(bad):
        raise NotPSD(
            f"matrix is not numerically PSD: lambda_min={w.min():.3e}, "
            f"lambda_max={scale.max():.3e}"
        )
    return np.clip(w, 0.0, None), v


def is_sym_psd(m: np.ndarray, tol: float = TOL_EIG) -> bool:
    m = np.asarray(m, dtype=float)
    if not np.array_equal(m, m.T):
        return False
    w = np.linalg.eigvalsh(m)
    return bool(w.min() >= -tol * max(abs(w.max()), 1e-300))


def sqrt_psd(m: np.ndarray, tol: float = TOL_EIG) -> np.ndarray:
    """Symmetric PSD square root S with S @ S = m."""
    w, v = _clamped_eigh(m, tol)
    s = (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return symmetrize(s)


def sqrt_psd_many(ms: np.ndarray, tol: float = TOL_EIG) -> np.ndarray:
    """Batched PSD square root of an (M, d, d) stack."""
    return sqrt_psd(ms, tol)


def inv_psd(m: np.ndarray, tol: float = TOL_EIG) -> np.ndarray:
    """Inverse of a numerically positive definite symmetric matrix."""
    w, v = _clamped_eigh(m, tol)
    if w.min() <= 0.0:
        raise NotPSD("matrix is singular after PSD clamping; cannot invert")
    return symmetrize((v / w[..., None, :]) @ np.swapaxes(v, -1, -2))


def logdet_psd(m: np.ndarray, tol: float = TOL_EIG) -> float:
    w, _ = _clamped_eigh(m, tol)
    if w.min() <= 0.0:
        return -math.inf
    return float(np.sum(np.log(w), axis=-1))


def lambda_min(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(symmetrize(m))[..., 0]


def lambda_max(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(symmetrize(m))[..., -1]


# ---------------------------------------------------------------------------
# exact even radial moments over cubes
# ---------------------------------------------------------------------------

def _axis_even_moments(c: np.ndarray, r: float, kmax: int) -> np.ndarray:
    """1-D integrals int_{c-r}^{c+r} t^{2a} dt for a = 0..kmax.

    ``c`` may be an array of centers; the result has shape c.shape + (kmax+1,).
    """
    c = np.asarray(c, dtype=float)
    out = np.empty(c.shape + (kmax + 1,))
    hi = c + r
    lo = c - r
    for a in range(kmax + 1):
        p = 2 * a + 1
        out[..., a] = (hi ** p - lo ** p) / p
    return out


def cube_even_moments(center: np.ndarray, r: float, kmax: int) -> np.ndarray:
    """Exact moments M_k = int_{Q(center, r)} |y|^(2k) dy for k = 0..kmax."""
    return cube_even_moments_many(np.asarray(center, dtype=float)[None, :], r, kmax)[0]


def cube_even_moments_many(centers: np.ndarray, r: float, kmax: int) -> np.ndarray:
    """Vectorized :func:`cube_even_moments` over an (M, n) array of centers.

    Works by the multinomial recursion T_j[k] = sum_a C(k, a) I_a(axis j)
    T_{j-1}[k-a], where I_a are the 1-D even moments of axis j.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    m, n = centers.shape
    binom = np.zeros((kmax + 1, kmax + 1))
    for k in range(kmax + 1):
        for a in range(k + 1):
            binom[k, a] = math.comb(k, a)
    acc = _axis_even_moments(centers[:, 0], r, kmax)  # (m, kmax+1)
    for j in range(1, n):
        ax = _axis_even_moments(centers[:, j], r, kmax)
        new = np.zeros_like(acc)
        for k in range(kmax + 1):
            for a in range(k + 1):
                new[:, k] += binom[k, a] * ax[:, a] * acc[:, k - a]
        acc = new
    return acc


def radial_poly_cube_integral_many(coeffs: Sequence[float], centers: np.ndarray,
                                   r: float) -> np.ndarray:
    """Exact int_Q p(|y|^2) dy for p given by ``coeffs`` (ascending in |y|^2)."""
    coeffs = np.asarray(coeffs, dtype=float)
    mom = cube_even_moments_many(centers, r, len(coeffs) - 1)
    return mom @ coeffs


# ---------------------------------------------------------------------------
# scalar weight descriptors
# ---------------------------------------------------------------------------

class ScalarWeight:
    """A nonnegative scalar weight on R^n \\ {0} with an analytic descriptor."""

    n: int
    singular_at_origin = False

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, x) -> float:
        return float(self.eval_many(np.asarray(x, dtype=float)[None, :])[0])

    def exact_cube_integral_many(self, centers: np.ndarray, r: float) -> Optional[np.ndarray]:
        return None

    def radial_poly(self) -> Optional[np.ndarray]:
        """Coefficients in s = |x|^2 if the weight is a radial polynomial."""
        return None

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):  # pragma: no cover
        return f"{type(self).__name__}({self.to_config()})"


@dataclass(frozen=True, repr=False)
class ConstantScalar(ScalarWeight):
    c: float
    n: int = 3

    def __post_init__(self):
        if self.c < 0:
            raise ConfigError("constant scalar weight must be nonnegative")

    def eval_many(self, X):
        return np.full(np.atleast_2d(X).shape[0], float(self.c))

    def exact_cube_integral_many(self, centers, r):
        centers = np.atleast_2d(centers)
        vol = np.broadcast_to((2.0 * np.asarray(r, dtype=float)) ** self.n,
                              (centers.shape[0],))
        return self.c * vol

    def radial_poly(self):
        return np.array([self.c])

    def to_config(self):
        return {"kind": "constant_scalar", "n": self.n, "c": self.c}


@dataclass(frozen=True, repr=False)
class PowerScalar(ScalarWeight):
    """a * |x|^gamma, integrable near the origin for gamma > -n."""

    gamma: float
    a: float = 1.0
    n: int = 3

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigError("power scalar coefficient must be positive")
        if self.gamma <= -self.n:
            raise ConfigError("power scalar exponent must exceed -n for local integrability")

    @property
    def singular_at_origin(self):
        return self.gamma < 0

    def eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t = np.linalg.norm(X, axis=1)
        if self.gamma < 0 and np.any(t == 0.0):
            raise DomainError("negative-exponent power weight evaluated at the origin")
        return self.a * t ** self.gamma

    def exact_cube_integral_many(self, centers, r):
        g = self.gamma
        if g >= 0 and g == 2 * round(g / 2):
            k = int(round(g / 2))
            return self.a * cube_even_moments_many(centers, r, k)[:, k]
        return None

    def radial_poly(self):
        g = self.gamma
        if g >= 0 and g == 2 * round(g / 2):
            coeffs = np.zeros(int(round(g / 2)) + 1)
            coeffs[-1] = self.a
            return coeffs
        return None

    def to_config(self):
        return {"kind": "power_scalar", "n": self.n, "gamma": self.gamma, "a": self.a}


@dataclass(frozen=True, repr=False)
class PolyScalar(ScalarWeight):
    """Polynomial in s = |x|^2 with nonnegative coefficients (hence nonnegative)."""

    coeffs: tuple
    n: int = 3

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if any(c < 0 for c in self.coeffs):
            raise ConfigError("polynomial scalar weight requires nonnegative coefficients")

    def eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.einsum("ij,ij->i", X, X)
        out = np.zeros_like(s)
        for c in reversed(self.coeffs):
            out = out * s + c
        return out

    def exact_cube_integral_many(self, centers, r):
        return radial_poly_cube_integral_many(self.coeffs, centers, r)

    def radial_poly(self):
        return np.asarray(self.coeffs)

    def to_config(self):
        return {"kind": "poly_scalar", "n": self.n, "coeffs": list(self.coeffs)}


# ---------------------------------------------------------------------------
# matrix weights
# ---------------------------------------------------------------------------

class MatrixWeight:
    """Base class: an evaluable symmetric PSD d x d matrix field on R^n."""

    n: int
    d: int
    singular_at_origin = False

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at an (M, n) batch of points; returns (M, d, d)."""
        raise NotImplementedError

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"point has dimension {x.shape}, weight lives on R^{self.n}")
        return self.eval_many(x[None, :])[0]

    def exact_cube_integral_many(self, centers: np.ndarray, r: float) -> Optional[np.ndarray]:
        """Exact int_Q W over cubes Q(center_i, r), or None when unavailable."""
        return None

    def exact_cube_integral(self, center, r) -> Optional[np.ndarray]:
        out = self.exact_cube_integral_many(np.asarray(center, dtype=float)[None, :], r)
        return None if out is None else out[0]

    def qform_radial_poly(self, e: np.ndarray) -> Optional[np.ndarray]:
        """<W(x) e, e> as a polynomial in s = |x|^2, when the descriptor allows."""
        return None

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):  # pragma: no cover
        cfg = self.to_config()
        return f"{type(self).__name__}(n={cfg['n']}, d={cfg['d']})"


@dataclass(frozen=True, repr=False)
class ConstantWeight(MatrixWeight):
    mat: np.ndarray
    n: int = 3

    def __post_init__(self):
        m = symmetrize(np.asarray(self.mat, dtype=float))
        if not is_sym_psd(m):
            raise NotPSD("constant weight matrix must be symmetric PSD")
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "d", m.shape[0])

    def eval_many(self, X):
        X = np.atleast_2d(X)
        return np.broadcast_to(self.mat, (X.shape[0],) + self.mat.shape).copy()

    def exact_cube_integral_many(self, centers, r):
        centers = np.atleast_2d(centers)
        vol = np.broadcast_to((2.0 * np.asarray(r, dtype=float)) ** self.n,
                              (centers.shape[0],))
        return vol[:, None, None] * self.mat[None, :, :]

    def qform_radial_poly(self, e):
        e = np.asarray(e, dtype=float)
        return np.array([float(e @ self.mat @ e)])

    def to_config(self):
        return {"kind": "constant", "n": self.n, "d": self.d, "mat": self.mat.tolist()}


def identity_weight(n: int = 3, d: int = 2) -> ConstantWeight:
    return ConstantWeight(np.eye(d), n=n)


@dataclass(frozen=True, repr=False)
class ScalarDiagWeight(MatrixWeight):
    """diag(v_1(x), ..., v_d(x)) built from scalar weight descriptors."""

    entries: tuple
    n: int = 3

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ConfigError("diagonal weight needs at least one scalar entry")
        for v in entries:
            if v.n != self.n:
                raise ConfigError("scalar entries must share the ambient dimension")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "d", len(entries))

    @property
    def singular_at_origin(self):
        return any(v.singular_at_origin for v in self.entries)

    def eval_many(self, X):
        X = np.atleast_2d(X)
        out = np.zeros((X.shape[0], self.d, self.d))
        for i, v in enumerate(self.entries):
            out[:, i, i] = v.eval_many(X)
        return out

    def exact_cube_integral_many(self, centers, r):
        centers = np.atleast_2d(centers)
        out = np.zeros((centers.shape[0], self.d, self.d))
        for i, v in enumerate(self.entries):
            col = v.exact_cube_integral_many(centers, r)
            if col is None:
                return None
            out[:, i, i] = col
        return out

    def qform_radial_poly(self, e):
        e = np.asarray(e, dtype=float)
        polys = [v.radial_poly() for v in self.entries]
        if any(p is None for p in polys):
            return None
        kmax = max(len(p) for p in polys)
        out = np.zeros(kmax)
        for i, p in enumerate(polys):
            out[: len(p)] += e[i] ** 2 * p
        return out

    def to_config(self):
        return {"kind": "scalar_diag", "n": self.n, "d": self.d,
                "entries": [v.to_config() for v in self.entries]}


@dataclass(frozen=True, repr=False)
class PowerWeight(MatrixWeight):
    """V(x)_ij = a_ij |x|^((gamma_i + gamma_j)/2) with A positive definite.

    The mixed-exponent structure makes V(x) = D(x) A D(x) with
    D(x) = diag(|x|^(gamma_i / 2)), so V is positive definite for every
    x != 0.  The inverse has the closed form a^{ij} |x|^(-(gamma_i+gamma_j)/2).
    """

    A: np.ndarray
    gamma: np.ndarray
    n: int = 3

    def __post_init__(self):
        A = symmetrize(np.asarray(self.A, dtype=float))
        g = np.asarray(self.gamma, dtype=float)
        if A.shape[0] != g.shape[0]:
            raise ConfigError("coefficient matrix and exponent vector sizes differ")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise NotPSD("power weight requires a positive definite coefficient matrix")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "d", A.shape[0])

    @property
    def exponent_table(self) -> np.ndarray:
        return 0.5 * (self.gamma[:, None] + self.gamma[None, :])

    @property
    def singular_at_origin(self):
        return bool(self.gamma.min() < 0)

    def eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t = np.linalg.norm(X, axis=1)
        if self.gamma.min() < 0 and np.any(t == 0.0):
            raise DomainError("power weight with negative exponents evaluated at the origin")
        G = self.exponent_table
        with np.errstate(divide="ignore"):
            pw = t[:, None, None] ** G[None, :, :]
        return self.A[None, :, :] * pw

    def inverse_eval(self, x) -> np.ndarray:
        """Closed-form V(x)^{-1} = (a^{ij} |x|^{-(gamma_i+gamma_j)/2})."""
        x = np.asarray(x, dtype=float)
        t = float(np.linalg.norm(x))
        if t == 0.0:
            raise DomainError("power weight inverse is undefined at the origin")
        Ainv = np.linalg.inv(self.A)
        return symmetrize(Ainv * t ** (-self.exponent_table))

    def exact_cube_integral_many(self, centers, r):
        G = self.exponent_table
        flat = G.ravel()
        if np.all(flat >= 0) and np.allclose(flat, 2 * np.round(flat / 2)):
            centers = np.atleast_2d(centers)
            kmax = int(round(flat.max() / 2))
            mom = cube_even_moments_many(centers, r, kmax)
            out = np.zeros((centers.shape[0], self.d, self.d))
            for i in range(self.d):
                for j in range(self.d):
                    out[:, i, j] = self.A[i, j] * mom[:, int(round(G[i, j] / 2))]
            return out
        return None

    def to_config(self):
        return {"kind": "power", "n": self.n, "d": self.d,
                "A": self.A.tolist(), "gamma": self.gamma.tolist()}


@dataclass(frozen=True, repr=False)
class PolynomialPSDWeight(MatrixWeight):
    """P(x)^T P(x) for a matrix P whose entries are polynomials in s = |x|^2.

    PSD holds structurally.  ``table`` has shape (d, d, K): table[i, j] are the
    ascending coefficients of P_ij in s.
    """

    table: np.ndarray
    n: int = 3

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 3 or t.shape[0] != t.shape[1]:
            raise ConfigError("polynomial weight table must have shape (d, d, K)")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "d", t.shape[0])

    def _factor_at(self, s: np.ndarray) -> np.ndarray:
        # Horner evaluation of every entry of P at s; (M, d, d)
        out = np.zeros((s.shape[0], self.d, self.d))
        for k in range(self.table.shape[2] - 1, -1, -1):
            out = out * s[:, None, None] + self.table[None, :, :, k]
        return out

    def eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.einsum("ij,ij->i", X, X)
        P = self._factor_at(s)
        return np.einsum("mki,mkj->mij", P, P)

    def _entry_polys(self) -> np.ndarray:
        # coefficients of (P^T P)_ij in s; shape (d, d, 2K-1)
        K = self.table.shape[2]
        out = np.zeros((self.d, self.d, 2 * K - 1))
        for i in range(self.d):
            for j in range(self.d):
                acc = np.zeros(2 * K - 1)
                for k in range(self.d):
                    acc += np.convolve(self.table[k, i], self.table[k, j])
                out[i, j] = acc
        return out

    def exact_cube_integral_many(self, centers, r):
        centers = np.atleast_2d(centers)
        polys = self._entry_polys()
        kmax = polys.shape[2] - 1
        mom = cube_even_moments_many(centers, r, kmax)
        return np.einsum("ijk,mk->mij", polys, mom)

    def qform_radial_poly(self, e):
        e = np.asarray(e, dtype=float)
        polys = self._entry_polys()
        return np.einsum("i,j,ijk->k", e, e, polys)

    def to_config(self):
        return {"kind": "polynomial_psd", "n": self.n, "d": self.d,
                "table": self.table.tolist()}


class RankOneRadialWeight(PolynomialPSDWeight):
    """The rank-one radial weight [[1, |x|^2], [|x|^2, |x|^4]].

    It is the outer square of (1, |x|^2)^T: symmetric, PSD, polynomial, and
    nondegenerate in the integrated sense, yet its averages and pointwise
    values fail to commute badly enough to defeat the noncommutativity class
    and the lower Fefferman-Phong inequality.
    """

    def __init__(self, n: int = 3):
        table = np.zeros((2, 2, 2))
        table[0, 0] = [1.0, 0.0]   # P_00 = 1
        table[0, 1] = [0.0, 1.0]   # P_01 = s
        super().__init__(table=table, n=n)

    def eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.einsum("ij,ij->i", X, X)
        out = np.empty((X.shape[0], 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 0, 1] = s
        out[:, 1, 0] = s
        out[:, 1, 1] = s * s
        return out

    def norm_many(self, X) -> np.ndarray:
        """Operator norm |V(x)| = 1 + |x|^4 (the weight is rank one)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.einsum("ij,ij->i", X, X)
        return 1.0 + s * s

    def to_config(self):
        return {"kind": "rank_one_radial", "n": self.n, "d": 2}


@dataclass(frozen=True, repr=False)
class NormDiagWeight(MatrixWeight):
    """|V(x)| I_d: the operator norm of a base weight times the identity."""

    base: MatrixWeight

    def __post_init__(self):
        object.__setattr__(self, "n", self.base.n)
        object.__setattr__(self, "d", self.base.d)

    @property
    def singular_at_origin(self):
        return self.base.singular_at_origin

    def norm_many(self, X) -> np.ndarray:
        if isinstance(self.base, RankOneRadialWeight):
            return self.base.norm_many(X)
        vals = self.base.eval_many(X)
        return np.linalg.eigvalsh(vals)[:, -1]

    def eval_many(self, X):
        X = np.atleast_2d(X)
        lam = self.norm_many(X)
        return lam[:, None, None] * np.eye(self.d)[None, :, :]

    def _dominant_entry_poly(self) -> Optional[np.ndarray]:
        # For diagonal bases whose top entry dominates everywhere (coefficient
        # dominance in s), |V| is that entry and stays a radial polynomial.
        if isinstance(self.base, RankOneRadialWeight):
            return np.array([1.0, 0.0, 1.0])
        if isinstance(self.base, ScalarDiagWeight):
            polys = [v.radial_poly() for v in self.base.entries]
            if any(p is None for p in polys):
                return None
            kmax = max(len(p) for p in polys)
            padded = [np.pad(p, (0, kmax - len(p))) for p in polys]
            for cand in padded:
                if all(np.all(cand - q >= 0) for q in padded):
                    return cand
            return None
        if isinstance(self.base, ConstantWeight):
            return np.array([float(np.linalg.eigvalsh(self.base.mat)[-1])])
        return None

    def exact_cube_integral_many(self, centers, r):
        poly = self._dominant_entry_poly()
        if poly is None:
            return None
        centers = np.atleast_2d(centers)
        scal = radial_poly_cube_integral_many(poly, centers, r)
        return scal[:, None, None] * np.eye(self.d)[None, :, :]

    def qform_radial_poly(self, e):
        poly = self._dominant_entry_poly()
        if poly is None:
            return None
        return float(np.dot(e, e)) * poly

    def to_config(self):
        return {"kind": "norm_diag", "n": self.n, "d": self.d,
                "base": self.base.to_config()}


def det_radial_poly(W: MatrixWeight) -> Optional[np.ndarray]:
    """det V(x) as a polynomial in s = |x|^2, when the descriptor allows."""
    if isinstance(W, ConstantWeight):
        return np.array([float(np.linalg.det(W.mat))])
    if isinstance(W, ScalarDiagWeight):
        polys = [v.radial_poly() for v in W.entries]
        if any(p is None for p in polys):
            return None
        acc = np.array([1.0])
        for p in polys:
            acc = np.convolve(acc, p)
        return acc
    if isinstance(W, PowerWeight):
        total = float(np.sum(W.gamma))
        if total >= 0 and total == 2 * round(total / 2):
            out = np.zeros(int(round(total / 2)) + 1)
            out[-1] = float(np.linalg.det(W.A))
            return out
        return None
    if isinstance(W, PolynomialPSDWeight) and W.d == 2:
        t = W.table
        detp = np.convolve(t[0, 0], t[1, 1]) - np.convolve(t[0, 1], t[1, 0])
        return np.convolve(detp, detp)
    if isinstance(W, NormDiagWeight):
        base = W._dominant_entry_poly()
        if base is None:
            return None
        acc = np.array([1.0])
        for _ in range(W.d):
            acc = np.convolve(acc, base)
        return acc
    return None


# ---------------------------------------------------------------------------
# spec'd operations
# ---------------------------------------------------------------------------

def eval_weight(W: MatrixWeight, x) -> np.ndarray:
    """Evaluate a matrix weight at a point; symmetric and numerically PSD."""
    return W.eval(x)


def inv_power_weight(W: PowerWeight, x) -> np.ndarray:
    """Closed-form inverse of a power weight away from the origin."""
    if not isinstance(W, PowerWeight):
        raise ConfigError("inv_power_weight applies to power weights only")
    return W.inverse_eval(x)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def scalar_from_config(cfg: dict) -> ScalarWeight:
    kind = cfg.get("kind")
    n = int(cfg.get("n", 3))
    if kind == "constant_scalar":
        return ConstantScalar(c=float(cfg["c"]), n=n)
    if kind == "power_scalar":
        return PowerScalar(gamma=float(cfg["gamma"]), a=float(cfg.get("a", 1.0)), n=n)
    if kind == "poly_scalar":
        return PolyScalar(coeffs=tuple(cfg["coeffs"]), n=n)
    raise ConfigError(f"unknown scalar weight kind: {kind!r}")


def from_config(cfg: dict) -> MatrixWeight:
    """Build a matrix weight from its JSON descriptor."""
    kind = cfg.get("kind")
    n = int(cfg.get("n", 3))
    if kind == "constant":
        return ConstantWeight(mat=np.asarray(cfg["mat"], dtype=float), n=n)
    if kind == "scalar_diag":
        return ScalarDiagWeight(entries=tuple(scalar_from_config(e) for e in cfg["entries"]), n=n)
    if kind == "power":
        return PowerWeight(A=np.asarray(cfg["A"], dtype=float),
                           gamma=np.asarray(cfg["gamma"], dtype=float), n=n)
    if kind == "polynomial_psd":
        return PolynomialPSDWeight(table=np.asarray(cfg["table"], dtype=float), n=n)
    if kind == "rank_one_radial":
        return RankOneRadialWeight(n=n)
    if kind == "norm_diag":
        return NormDiagWeight(base=from_config(cfg["base"]))
    raise ConfigError(f"unknown weight kind: {kind!r}")
