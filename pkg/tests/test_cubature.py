import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwlab import cubature as cb
from mwlab import weights as mw
from mwlab.errors import ConfigError, DomainError, QuadratureNonConvergence

# frozen oracle (scipy.integrate.tplquad on the positive octant, eps 1e-12):
# mean of ln|y|^2 over Q(0,1) in R^3
MEAN_LOG_SQ = -0.1877045233940396


def cube(center, r):
    return cb.Cube(center=np.asarray(center, dtype=float), r=r)


class TestAverage:
    def test_constant_field(self, identity2):
        got = cb.average(identity2, cube([0.3, -1.0, 2.0], 0.7))
        assert np.allclose(got, np.eye(2), rtol=1e-12)

    def test_second_moment_entry(self, diag_poly):
        # mean of |y|^2 over Q(0, r) is n r^2 / 3 = r^2 at n = 3
        for r in (0.5, 1.0, 2.0):
            got = cb.average(diag_poly, cube([0, 0, 0], r))
            assert got[0, 0] == pytest.approx(r * r, rel=1e-6)

    def test_rank_one_average_matches_closed_form(self, rank_one, rng):
        for _ in range(5):
            c = rng.uniform(-2, 2, size=3)
            r = float(rng.uniform(0.3, 1.5))
            got = cb.average(rank_one, cube(c, r))
            expect = rank_one.exact_cube_integral(c, r) / (2 * r) ** 3
            assert np.allclose(got, expect, rtol=1e-6)


class TestPsi:
    def test_constant_weight(self, identity2):
        got = cb.psi(identity2, [0.0, 0.0, 0.0], 1.0)
        assert np.allclose(got, 8.0 * np.eye(2), rtol=1e-10)

    def test_printed_closed_form_origin(self, rank_one):
        got = cb.psi(rank_one, [0.0, 0.0, 0.0], 1.0)
        expect = 8.0 * np.array([[1.0, 1.0], [1.0, 19.0 / 15.0]])
        assert np.allclose(got, expect, rtol=1e-6)

    def test_printed_closed_form_off_origin(self, rank_one):
        got = cb.psi(rank_one, [2.0, 0.0, 0.0], 1.0)
        expect = 8.0 * np.array([[1.0, 5.0], [5.0, 30.6]])
        assert np.allclose(got, expect, rtol=1e-6)

    def test_scaling_consistency(self, diag_poly, rng):
        # psi = average * (2r)^n * r^(2-n), a pure scaling identity
        for _ in range(5):
            c = rng.uniform(-2, 2, size=3)
            r = float(rng.uniform(0.2, 2.0))
            avg = cb.average(diag_poly, cube(c, r))
            ps = cb.psi(diag_poly, c, r)
            assert np.allclose(ps, avg * (2 * r) ** 3 * r ** (-1), rtol=1e-12)

    def test_refuses_low_dimension(self):
        W = mw.ConstantWeight(np.eye(2), n=2)
        with pytest.raises(DomainError):
            cb.psi(W, [0.0, 0.0], 1.0)

    def test_exact_matches_quadrature(self, rank_one, diag_poly, rng):
        for W in (rank_one, diag_poly):
            c = rng.uniform(-1.5, 1.5, size=3)
            r = float(rng.uniform(0.4, 1.2))
            q = cb.psi(W, c, r, method="quadrature")
            e = cb.psi(W, c, r, method="exact")
            assert np.allclose(q, e, rtol=1e-6)


class TestQuadratureEngine:
    def test_midpoint_for_singular_origin_cubes(self):
        v = mw.PowerScalar(gamma=-1.0)
        W = mw.ScalarDiagWeight(entries=(v,))
        got = cb.average(W, cube([0, 0, 0], 1.0), tol=1e-4)
        # mean of |y|^-1 over Q(0,1): finite, between the inscribed/escribed
        # ball values; the radial oracle gives int r^(-1) 4 pi r^2 dr type size
        assert np.isfinite(got[0, 0]) and got[0, 0] > 0

    def test_nonconvergence_is_loud(self):
        a = np.array([0.1234, 0.2345, 0.0456])

        class Spiky(mw.MatrixWeight):
            n, d = 3, 1
            singular_at_origin = False

            def eval_many(self, X):
                X = np.atleast_2d(X)
                v = 1.0 / np.maximum(np.linalg.norm(X - a, axis=1), 1e-300) ** 2.5
                return v[:, None, None]

            def to_config(self):
                return {"kind": "spiky", "n": 3, "d": 1}

        with pytest.raises(QuadratureNonConvergence):
            cb.average(Spiky(), cube([0, 0, 0], 1.0), tol=1e-10, max_level=3)

    def test_explicit_rule_levels(self, identity2):
        rule = cb.QuadratureRule(level=2, scheme="midpoint-tensor")
        assert rule.nodes_per_axis() == 4
        got = cb.average(identity2, cube([0, 0, 0], 1.0), rule=rule)
        assert np.allclose(got, np.eye(2))


class TestReducing:
    def test_p2_exact_square_root(self, rank_one, rng):
        Q = cube(rng.uniform(-1, 1, size=3), 0.8)
        R = cb.reducing_matrix(rank_one, Q, 2.0)
        avg = cb.average(rank_one, Q)
        assert np.linalg.norm(R @ R - avg) <= 1e-10 * np.linalg.norm(avg)

    def test_p2_identity(self, identity2):
        R = cb.reducing_matrix(identity2, cube([0, 0, 0], 1.0), 2.0)
        assert np.allclose(R, np.eye(2), rtol=1e-10)

    def test_p4_brackets_directional_norms(self, diag_poly):
        Q = cube([1.0, 0.5, -0.25], 0.5)
        R = cb.reducing_matrix(diag_poly, Q, 4.0)
        d = 2
        # independent 1-D oracle per axis: N(e_i)^p = avg of v_i^(p/2)... for
        # diagonal weights |W^(1/p) e_i|^p = v_i, so N(e_i) = (avg v_i)^(1/p)
        for i, e in enumerate(np.eye(2)):
            poly = diag_poly.entries[i].radial_poly()
            mom = mw.radial_poly_cube_integral_many(poly, Q.center[None, :], Q.r)[0]
            N = (mom / Q.volume) ** 0.25
            val = np.linalg.norm(R @ e)
            assert N * (1 - 1e-6) <= val <= math.sqrt(d) * N * (1 + 1e-6)

    def test_degenerate_direction_raises(self):
        W = mw.ScalarDiagWeight(entries=(mw.PolyScalar((0.0, 1.0)),
                                         mw.ConstantScalar(0.0)))
        with pytest.raises(Exception):
            cb.reducing_matrix(W, cube([0, 0, 0], 1.0), 4.0)


class TestDeterminantLemmas:
    def test_jensen_identity_weight(self, identity2):
        lhs, rhs, ok = cb.check_matrix_jensen(identity2, cube([0, 0, 0], 1.0))
        assert ok and lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)

    def test_jensen_log_oracle(self):
        W = mw.ScalarDiagWeight(entries=(mw.PolyScalar((0.0, 1.0)),
                                         mw.PolyScalar((0.0, 1.0))))
        lhs, rhs, ok = cb.check_matrix_jensen(W, cube([0, 0, 0], 1.0))
        assert ok
        assert lhs == pytest.approx(1.0, rel=1e-6)
        assert rhs == pytest.approx(math.exp(2 * MEAN_LOG_SQ), rel=1e-4)
        assert lhs >= rhs

    def test_jensen_rank_one_domain_error(self, rank_one):
        with pytest.raises(DomainError):
            cb.check_matrix_jensen(rank_one, cube([1, 1, 1], 0.5))

    def test_hadamard_identity(self):
        assert cb.check_hadamard(np.eye(3), np.eye(3))

    def test_hadamard_diagonal_equality(self):
        assert cb.check_hadamard(np.diag([2.0, 3.0]), np.eye(2))

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_hadamard_random_rotated(self, seed):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((3, 3))
        M = B @ B.T
        Qr, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert cb.check_hadamard(M, Qr)

    def test_hadamard_checks_orthonormality(self):
        with pytest.raises(ConfigError):
            cb.check_hadamard(np.eye(2), np.array([[1.0, 0.0], [1.0, 0.0]]))


class TestGrowthAndDoubling:
    def test_controlled_growth(self, rank_one, diag_poly, rng):
        # Psi(x, r) <= C (r/R)^(2 - n/p) Psi(x, R) in the PSD order
        p = 2.0
        expo = 2.0 - 3.0 / p
        worst = 0.0
        for W in (rank_one, diag_poly):
            for _ in range(10):
                x = rng.uniform(-3, 3, size=3)
                R = float(rng.uniform(0.5, 2.0))
                r = R * float(rng.uniform(0.1, 0.9))
                big = cb.psi(W, x, R, method="exact") * (r / R) ** expo
                small = cb.psi(W, x, r, method="exact")
                lam = np.linalg.eigvalsh(np.linalg.solve(big, small))
                worst = max(worst, lam.max())
        assert np.isfinite(worst) and worst < 50.0

    def test_doubling(self, rank_one, diag_poly, rng):
        worst = 0.0
        for W in (rank_one, diag_poly):
            for _ in range(10):
                x = rng.uniform(-3, 3, size=3)
                r = float(rng.uniform(0.2, 1.5))
                small = W.exact_cube_integral(x, r)
                big = W.exact_cube_integral(x, 2 * r)
                lam = np.linalg.eigvalsh(np.linalg.solve(small, big))
                worst = max(worst, lam.max())
        assert np.isfinite(worst) and worst < 2000.0

    def test_doubling_stable_under_quadrature_refinement(self, diag_poly):
        Q1 = cube([0.5, 0.5, 0.5], 0.5)
        vals = []
        for tol in (1e-4, 1e-6):
            small = cb.average(diag_poly, Q1, tol=tol) * Q1.volume
            Q2 = cube([0.5, 0.5, 0.5], 1.0)
            big = cb.average(diag_poly, Q2, tol=tol) * Q2.volume
            vals.append(np.linalg.eigvalsh(np.linalg.solve(small, big)).max())
        assert vals[0] == pytest.approx(vals[1], rel=1e-3)


class TestCubeFamily:
    def test_cubes_stay_in_box(self):
        fam = cb.CubeFamily(generator="random", box=4.0, count=30,
                            r_min=0.25, r_max=2.0, seed=9)
        for c in fam.cubes():
            assert np.all(np.abs(c.center) + c.r <= 4.0 + 1e-9)

    def test_refinement_nests(self):
        for gen in ("dyadic", "random"):
            fam = cb.CubeFamily(generator=gen, box=4.0, count=12,
                                r_min=0.5, r_max=2.0, seed=3)
            keys = {c.key() for c in fam.cubes()}
            ref_keys = {c.key() for c in fam.refine().cubes()}
            assert keys <= ref_keys
            assert len(ref_keys) > len(keys)

    def test_serialization_round_trip(self):
        fam = cb.CubeFamily(generator="dyadic", box=8.0, count=24,
                            r_min=0.5, r_max=4.0)
        fam2 = cb.CubeFamily.from_config(fam.to_config())
        assert [c.key() for c in fam.cubes()] == [c.key() for c in fam2.cubes()]
