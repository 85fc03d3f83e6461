import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlab.model import (CoefficientField, NonlinearitySpec, PowerTerm,
                           ProblemSpec, ball_grid, c_constant, check_A1,
                           check_A3, eval_F, eval_f, normalize_coordinates,
                           s_grid, sublinear_floor)

ORIGIN2 = np.zeros((1, 2))


class TestPrimitive:
    def test_homogeneous_q15(self):
        nl = NonlinearitySpec.homogeneous(1.5)
        assert eval_F(nl, ORIGIN2, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_homogeneous_q1_abs(self):
        nl = NonlinearitySpec.homogeneous(1.0)
        assert eval_F(nl, ORIGIN2, -0.5) == pytest.approx(0.5, abs=1e-15)

    def test_sum_of_powers_closed_form_vs_quadrature(self):
        nl = NonlinearitySpec.sum_of_powers([PowerTerm(1.5, 2.0)], kappa2=0.5)
        F = eval_F(nl, ORIGIN2, 1.0)
        assert F == pytest.approx(4.0 / 3.0, abs=1e-15)
        # independent oracle: adaptive quadrature of f
        tab = NonlinearitySpec.tabulated(
            lambda x, s: eval_f(nl, x, s), q=1.5, kappa2=0.5)
        assert eval_F(tab, ORIGIN2, 1.0) == pytest.approx(4.0 / 3.0, rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=1.0, max_value=1.999),
           st.floats(min_value=-5, max_value=5).filter(lambda s: abs(s) > 1e-6))
    def test_homogeneous_euler_relation(self, q, s):
        # s f(s) = q F(s) exactly for the power law
        nl = NonlinearitySpec.homogeneous(q, eps0=10.0)
        fs = float(eval_f(nl, ORIGIN2, s)[0]) * s
        qF = q * float(eval_F(nl, ORIGIN2, s)[0])
        assert fs == pytest.approx(qF, rel=1e-14)


class TestCheckA3:
    def test_homogeneous_passes_with_zero_upper_margin(self):
        nl = NonlinearitySpec.homogeneous(1.5)
        rep = check_A3(nl)
        assert rep.passed
        assert rep.clauses["A3.i.upper"].margin == pytest.approx(0.0, abs=1e-15)

    def test_sign_flip_fails_clause_i(self):
        nl = NonlinearitySpec.tabulated(
            lambda x, s: -np.sign(s) * np.abs(s) ** 0.5, q=1.5, kappa2=0.5)
        rep = check_A3(nl, points=ball_grid(2, 1.0, 16),
                       s_values=s_grid(1.0, 32))
        clause = rep.clauses["A3.i.lower"]
        assert not clause.passed and clause.witness is not None

    def test_mixed_powers_pass(self):
        nl = NonlinearitySpec.sum_of_powers(
            [PowerTerm(1.0, 1.0), PowerTerm(1.5, 1.0)], kappa2=1.0)
        rep = check_A3(nl)
        assert rep.clauses["A3.i.lower"].passed
        assert rep.clauses["A3.i.upper"].passed

    def test_unbounded_log_gradient_fails_clause_iii(self):
        coef = lambda x: x[..., 0] ** 2 + 1e-8
        grad = lambda x: np.stack([2 * x[..., 0], np.zeros_like(x[..., 0])], axis=-1)
        nl = NonlinearitySpec.sum_of_powers(
            [PowerTerm(1.5, coef, grad)], kappa1=10.0, kappa2=1e-12)
        rep = check_A3(nl)
        clause = rep.clauses["A3.iii"]
        assert not clause.passed and clause.witness is not None

    def test_vanishing_floor_fails_clause_iv(self):
        nl = NonlinearitySpec.tabulated(
            lambda x, s: x[..., 0] ** 2 * np.sign(s) * np.abs(s) ** 0.5,
            q=1.5, kappa2=0.5)
        pts = ball_grid(2, 1.0, 16)
        pts[0] = 0.0  # make sure the degenerate point is sampled
        rep = check_A3(nl, points=pts, s_values=s_grid(1.0, 32))
        clause = rep.clauses["A3.iv"]
        assert not clause.passed and clause.witness is not None


class TestSublinearFloor:
    def test_homogeneous(self):
        nl = NonlinearitySpec.homogeneous(1.5, eps0=1.0)
        assert sublinear_floor(nl, np.zeros(2)) == pytest.approx(2 / 3, abs=1e-15)

    def test_homogeneous_q1_small_eps(self):
        nl = NonlinearitySpec.homogeneous(1.0, eps0=0.5)
        assert sublinear_floor(nl, np.zeros(2)) == pytest.approx(1.0, abs=1e-15)

    def test_scan_confirms_floor(self):
        nl = NonlinearitySpec.sum_of_powers([PowerTerm(1.5, 2.0)], kappa2=0.5)
        kap = float(sublinear_floor(nl, np.zeros(2)))
        assert kap == pytest.approx(4 / 3, abs=1e-14)
        s = s_grid(nl.eps0, 128)
        F = eval_F(nl, ORIGIN2, s)
        assert np.all(F >= kap * np.abs(s) ** nl.q * (1 - 1e-12))
        assert kap >= nl.kappa2 / nl.eps0 ** nl.q


class TestCConstant:
    @pytest.mark.parametrize("dim,q,expected",
                             [(3, 1.0, 5.0), (2, 1.7, 4.0), (3, 1.5, 4.5)])
    def test_values(self, dim, q, expected):
        assert c_constant(dim, q) == pytest.approx(expected, abs=1e-15)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(min_value=2, max_value=12),
           st.floats(min_value=1.0, max_value=1.999))
    def test_positive(self, dim, q):
        assert c_constant(dim, q) > 0.0


class TestCoefficientFields:
    def test_identity_mu_and_z(self):
        A = CoefficientField.identity(2)
        pts = ball_grid(2, 1.0, 32)
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-9]
        np.testing.assert_allclose(A.mu(pts), 1.0, atol=1e-14)
        np.testing.assert_allclose(A.z_field(pts), pts, atol=1e-14)
        np.testing.assert_allclose(A.div_z(pts), 2.0, atol=1e-12)

    @pytest.mark.parametrize("make", [
        lambda: CoefficientField.rotation_perturbed(0.3, 2),
        lambda: CoefficientField.diagonal([4.0, 1.0]),
        lambda: CoefficientField.from_expressions(
            2, {"a11": "1 + x1^2/4", "a12": "0", "a22": "1"}, 0.7),
    ])
    def test_z_is_radial_on_spheres(self, make):
        # <Z, x/|x|> = |x| identically for symmetric A
        A = make()
        pts = ball_grid(2, 1.0, 64)
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-9]
        z = A.z_field(pts)
        r = np.linalg.norm(pts, axis=1)
        np.testing.assert_allclose(np.sum(z * pts, axis=1) / r, r, rtol=1e-12)

    def test_check_A1_builtin_passes(self):
        rep = check_A1(CoefficientField.rotation_perturbed(0.2, 2))
        assert rep.passed

    def test_div_a_grad_absx_identity(self):
        A = CoefficientField.identity(3)
        pts = np.array([[0.5, 0.0, 0.0], [0.1, 0.2, -0.3]])
        r = np.linalg.norm(pts, axis=1)
        np.testing.assert_allclose(A.div_a_grad_absx(pts), 2.0 / r, rtol=1e-13)


class TestNormalizeCoordinates:
    def test_identity_at_origin_is_noop(self):
        spec = ProblemSpec.model(2, 1.5)
        out = normalize_coordinates(spec, np.zeros(2))
        pts = ball_grid(2, out.outer_radius, 16)
        np.testing.assert_allclose(out.coefficients.entries(pts),
                                   spec.coefficients.entries(pts), atol=1e-14)
        assert out.outer_radius == pytest.approx(spec.outer_radius)

    def test_diagonal_squeeze(self):
        spec = ProblemSpec(2, 1.0, CoefficientField.diagonal([4.0, 1.0]),
                           NonlinearitySpec.homogeneous(1.5))
        out = normalize_coordinates(spec, np.zeros(2))
        A0 = out.coefficients.entries(np.zeros((1, 2)))[0]
        np.testing.assert_allclose(A0, np.eye(2), atol=1e-13)
        assert out.outer_radius == pytest.approx(0.5)  # radius / ||A0^(1/2)||

    def test_double_application_is_stable(self):
        spec = ProblemSpec.model(2, 1.5)
        once = normalize_coordinates(spec, np.array([0.3, 0.0]))
        twice = normalize_coordinates(once, np.zeros(2))
        pts = ball_grid(2, twice.outer_radius * 0.9, 16)
        np.testing.assert_allclose(twice.coefficients.entries(pts),
                                   once.coefficients.entries(pts), atol=1e-12)

    def test_rejects_non_spd(self):
        bad = CoefficientField(2, lambda x: np.broadcast_to(
            np.diag([1.0, -1.0]), np.asarray(x).shape[:-1] + (2, 2)).copy(),
            lambda x: np.zeros(np.asarray(x).shape[:-1] + (2, 2, 2)),
            lambda x: np.full(np.asarray(x).shape[:-1], 0.5), "bad")
        spec = ProblemSpec(2, 1.0, bad, NonlinearitySpec.homogeneous(1.5))
        with pytest.raises(ValueError):
            normalize_coordinates(spec, np.zeros(2))

    def test_pullback_matches_change_of_variables(self, bowl):
        # u_tilde(x) = u(Tx) must solve the transformed equation; the
        # inverse-sandwich candidate A^{1/2} A^{-1}(Tx) A^{1/2} must not.
        from freqlab.fields import residual_field, sample_grid2d

        spec = bowl.spec
        x0 = np.array([0.25, 0.0])
        out = normalize_coordinates(spec, x0)
        A0 = spec.coefficients.entries(x0)
        w, Q = np.linalg.eigh(A0)
        M = (Q * np.sqrt(w)) @ Q.T

        def T(x):
            return np.asarray(x) @ M.T + x0

        R = min(out.outer_radius, 0.5)
        out.outer_radius = R
        fld = sample_grid2d(lambda x: bowl.u(T(x)), R, 96, 192,
                            spec.nonlinearity.q)
        rho_good = residual_field(out, fld,
                                  source=lambda x: _pullback_source(bowl, T, x))
        good = np.nanmax(np.abs(rho_good))

        inverse_sandwich = CoefficientField(
            2,
            lambda x: M @ np.linalg.inv(spec.coefficients.entries(T(x))) @ M,
            out.coefficients.entry_gradients,  # gradients irrelevant here
            out.coefficients.ellipticity, "inverse_sandwich")
        bad_spec = ProblemSpec(2, R, inverse_sandwich, out.nonlinearity,
                               out.potential, out.potential_source)
        rho_bad = residual_field(bad_spec, fld,
                                 source=lambda x: _pullback_source(bowl, T, x))
        bad = np.nanmax(np.abs(rho_bad))
        assert good < 1e-4
        assert bad > 100 * good


def _pullback_source(bowl, T, x):
    return bowl.source(T(x))


class TestQuadratureFailure:
    def test_unreachable_tolerance_raises_with_achieved(self):
        from freqlab.model import QuadratureError

        nl = NonlinearitySpec("tabulated", 1.5, 1.0, 1.0, 0.5,
                              f_callable=lambda x, s: np.sign(s) * np.abs(s) ** 0.5,
                              quad_rel_tol=0.0)
        with pytest.raises(QuadratureError) as err:
            eval_F(nl, np.zeros((1, 2)), 0.7)
        assert err.value.achieved > 0.0


class TestTranslationInvariance:
    def test_frequency_reads_the_shifted_center(self):
        # u vanishing to second order at x0: after carrying x0 to the
        # origin the frequency of the pulled-back field is 2 everywhere
        from freqlab.fields import sample_grid2d
        from freqlab.frequency import frequency_profile

        spec = ProblemSpec(2, 1.0, CoefficientField.identity(2),
                           NonlinearitySpec.zero())
        x0 = np.array([0.3, 0.0])
        out = normalize_coordinates(spec, x0)
        assert out.outer_radius == pytest.approx(0.7)

        def u(x):
            return (x[..., 0] - 0.3) * x[..., 1]

        def u_pulled(x):
            return u(np.asarray(x) + x0)  # T = identity + x0 here

        fld = sample_grid2d(u_pulled, out.outer_radius, 96, 256, 1.5)
        prof = frequency_profile(out, fld)
        assert np.nanmax(np.abs(prof.N - 2.0)) <= 1e-6


class TestA1AllBuiltins:
    @pytest.mark.parametrize("make", [
        lambda: CoefficientField.identity(2),
        lambda: CoefficientField.identity(3),
        lambda: CoefficientField.diagonal([4.0, 1.0]),
        lambda: CoefficientField.rotation_perturbed(0.2, 2),
        lambda: CoefficientField.rotation_perturbed(0.1, 3),
        lambda: CoefficientField.from_expressions(
            2, {"a11": "1 + x1^2/4", "a12": "0", "a22": "1"}, 0.7),
    ])
    def test_admissibility(self, make):
        coeff = make()
        assert check_A1(coeff).passed


class TestSuperlinearRouting:
    def test_cubic_term_is_boundedly_linearizable(self):
        from freqlab.model import superlinear_ratio_bound

        pts = ball_grid(2, 1.0, 16)
        bound = superlinear_ratio_bound(lambda x, s: s ** 3, 1.0, pts)
        assert bound <= 1.0 + 1e-12  # |s^3 / s| = s^2 <= eps0^2

    def test_sublinear_term_is_not(self):
        from freqlab.model import superlinear_ratio_bound

        pts = ball_grid(2, 1.0, 16)
        bound = superlinear_ratio_bound(
            lambda x, s: np.sign(s) * np.abs(s) ** 0.5, 1.0, pts)
        assert bound > 1e2  # |s|^{-1/2} blows up near s = 0
