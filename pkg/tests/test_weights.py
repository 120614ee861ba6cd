import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwlab import weights as mw
from mwlab.errors import DomainError, NotPSD


def random_points(rng, count, scale=5.0):
    return rng.uniform(-scale, scale, size=(count, 3))


class TestEval:
    def test_rank_one_at_unit_point(self, rank_one):
        assert np.allclose(rank_one.eval([1.0, 0.0, 0.0]), [[1.0, 1.0], [1.0, 1.0]])

    def test_rank_one_general_point(self, rank_one):
        x = np.array([1.0, 2.0, -2.0])
        s = 9.0
        assert np.allclose(rank_one.eval(x), [[1.0, s], [s, s * s]])

    def test_power_zero_exponents_give_constant(self, rng):
        A = np.array([[3.0, 1.0], [1.0, 2.0]])
        W = mw.PowerWeight(A=A, gamma=np.zeros(2))
        for x in random_points(rng, 5):
            assert np.allclose(W.eval(x), A)

    def test_scalar_diag_direct_substitution(self, diag_poly):
        got = diag_poly.eval([2.0, 0.0, 0.0])
        assert np.allclose(got, np.diag([4.0, 16.0]))

    def test_negative_power_rejects_origin(self):
        W = mw.PowerWeight(A=np.eye(2), gamma=np.array([-1.0, 1.0]))
        with pytest.raises(DomainError):
            W.eval([0.0, 0.0, 0.0])

    def test_dimension_mismatch(self, rank_one):
        with pytest.raises(DomainError):
            rank_one.eval([1.0, 0.0])


class TestSqrtPSD:
    def test_identity(self):
        assert np.array_equal(mw.sqrt_psd(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(mw.sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_rank_one_unit_sphere(self, rank_one):
        # V^(1/2) = V / sqrt(1 + |x|^4); at |x| = 1 that is [[1,1],[1,1]]/sqrt(2)
        V = rank_one.eval([0.0, 1.0, 0.0])
        S = mw.sqrt_psd(V)
        assert np.allclose(S, np.array([[1.0, 1.0], [1.0, 1.0]]) / np.sqrt(2.0))
        assert np.allclose(S @ S, V, rtol=1e-12, atol=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            mw.sqrt_psd(np.diag([1.0, -1.0]))

    def test_clamps_eigennoise(self):
        m = np.diag([1.0, -1e-14])
        S = mw.sqrt_psd(m)
        assert S[1, 1] == 0.0

    @given(st.integers(2, 4), st.integers(0, 10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_square_roundtrip(self, d, seed):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((d, d))
        M = B @ B.T
        S = mw.sqrt_psd(M)
        assert np.array_equal(S, S.T)
        rel = np.linalg.norm(S @ S - M) / max(np.linalg.norm(M), 1e-300)
        assert rel <= 1e-12


class TestInvPower:
    def test_diagonal_coefficient(self, rng):
        W = mw.PowerWeight(A=np.eye(2), gamma=np.array([1.0, 3.0]))
        x = rng.uniform(-2, 2, size=3)
        t = np.linalg.norm(x)
        assert np.allclose(W.inverse_eval(x), np.diag([t ** -1.0, t ** -3.0]))

    def test_constant_case(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        W = mw.PowerWeight(A=A, gamma=np.zeros(2))
        assert np.allclose(W.inverse_eval([1.0, 1.0, 1.0]), np.linalg.inv(A))

    def test_product_is_identity(self, rng):
        B = rng.standard_normal((2, 2))
        A = B @ B.T + 2 * np.eye(2)
        W = mw.PowerWeight(A=A, gamma=np.array([1.0, 3.0]))
        x = np.array([1.0, 1.0, 1.0])
        prod = W.eval(x) @ W.inverse_eval(x)
        assert np.linalg.norm(prod - np.eye(2)) <= 1e-10

    def test_rejects_origin(self):
        W = mw.PowerWeight(A=np.eye(2), gamma=np.array([1.0, 3.0]))
        with pytest.raises(DomainError):
            W.inverse_eval([0.0, 0.0, 0.0])


class TestCatalogInvariants:
    def _catalog(self, identity2, rank_one, diag_poly, power13):
        norm_diag = mw.NormDiagWeight(base=rank_one)
        return [identity2, rank_one, diag_poly, power13, norm_diag]

    def test_symmetry_and_psd_at_random_points(self, identity2, rank_one,
                                               diag_poly, power13, rng):
        X = random_points(rng, 1000)
        for W in self._catalog(identity2, rank_one, diag_poly, power13):
            vals = W.eval_many(X)
            assert np.array_equal(vals, np.swapaxes(vals, 1, 2))
            lam = np.linalg.eigvalsh(vals)
            assert np.all(lam[:, 0] >= -1e-10 * np.maximum(lam[:, -1], 1e-300))

    def test_norm_diag_matches_eigendecomposition(self, diag_poly, power13, rng):
        X = random_points(rng, 200)
        for base in (diag_poly, power13):
            ND = mw.NormDiagWeight(base=base)
            got = ND.eval_many(X)
            lam_max = np.linalg.eigvalsh(base.eval_many(X))[:, -1]
            expect = lam_max[:, None, None] * np.eye(2)
            assert np.allclose(got, expect, rtol=1e-12, atol=1e-14)

    def test_power_positive_definite_off_origin(self, power13, rng):
        X = random_points(rng, 400)
        X = X[np.linalg.norm(X, axis=1) > 1e-6]
        lam = np.linalg.eigvalsh(power13.eval_many(X))
        assert np.all(lam[:, 0] > 0)


class TestMoments:
    def test_first_moment_closed_form(self, rng):
        # int_Q |y|^2 = (2r)^n (|c|^2 + n r^2 / 3)
        for _ in range(20):
            c = rng.uniform(-3, 3, size=3)
            r = float(rng.uniform(0.1, 2.0))
            M = mw.cube_even_moments(c, r, 1)
            vol = (2 * r) ** 3
            assert M[0] == pytest.approx(vol)
            assert M[1] == pytest.approx(vol * (c @ c + r * r), rel=1e-12)

    def test_second_moment_against_quadrature(self, rng):
        from scipy.integrate import fixed_quad
        c = np.array([0.7, -0.3, 1.1])
        r = 0.9
        M2 = mw.cube_even_moments(c, r, 2)[2]
        # brute tensor Gauss-Legendre at high order as the independent oracle
        nodes, wts = np.polynomial.legendre.leggauss(12)
        pts = [c[i] + r * nodes for i in range(3)]
        total = 0.0
        for i, xi in enumerate(pts[0]):
            for j, yj in enumerate(pts[1]):
                for k, zk in enumerate(pts[2]):
                    total += wts[i] * wts[j] * wts[k] * (xi ** 2 + yj ** 2 + zk ** 2) ** 2
        total *= r ** 3
        assert M2 == pytest.approx(total, rel=1e-12)


class TestSerialization:
    def test_round_trip_all_kinds(self, identity2, rank_one, diag_poly, power13, rng):
        X = random_points(rng, 10)
        X = X[np.linalg.norm(X, axis=1) > 0.1]
        for W in (identity2, rank_one, diag_poly, power13,
                  mw.NormDiagWeight(base=diag_poly)):
            W2 = mw.from_config(W.to_config())
            assert np.allclose(W.eval_many(X), W2.eval_many(X))

    def test_polynomial_psd_structural(self, rng):
        table = rng.uniform(-1, 1, size=(2, 2, 2))
        W = mw.PolynomialPSDWeight(table=table)
        X = random_points(rng, 50)
        lam = np.linalg.eigvalsh(W.eval_many(X))
        assert np.all(lam[:, 0] >= -1e-12 * np.maximum(lam[:, -1], 1e-300))
        W2 = mw.from_config(W.to_config())
        assert np.allclose(W.eval_many(X), W2.eval_many(X))

    def test_rejects_unknown_kind(self):
        with pytest.raises(Exception):
            mw.from_config({"kind": "nope"})
