import numpy as np
import pytest

from freqlab.fields import sample_grid2d, solve_grid_2d, solve_radial
from freqlab.frequency import (ProfileControls, ZField, ball_integral,
                               frequency_profile, run_all_identity_checks,
                               sphere_integral, verify_H_prime,
                               verify_N_prime_bound, verify_f_transport,
                               verify_pohozaev_model, verify_rellich_general,
                               verify_surface_volume_D, verify_u2_bounds)
from freqlab.model import CoefficientField, NonlinearitySpec, ProblemSpec


class TestIntegrals:
    def test_constant_on_circle(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: np.ones(x.shape[:-1]), 1.0, 64, 128, 1.5)
        vals = sphere_integral(linear_mode_spec, fld, fld.u ** 2)
        k = np.argmin(np.abs(fld.r - 1.0))
        assert vals[k] == pytest.approx(2 * np.pi, rel=1e-13)

    def test_linear_field_surface_mass(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 64, 128, 1.5)
        vals = sphere_integral(linear_mode_spec, fld, fld.u ** 2)
        np.testing.assert_allclose(vals[1:], np.pi * fld.r[1:] ** 3, rtol=1e-12)

    def test_linear_field_dirichlet_energy(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 64, 128, 1.5)
        gx, gy = fld.gradient_cartesian()
        e = gx ** 2 + gy ** 2
        e[0] = 1.0  # pole row: |grad x1|^2 = 1
        vals = ball_integral(linear_mode_spec, fld, e)
        np.testing.assert_allclose(vals[4:], np.pi * fld.r[4:] ** 2, rtol=1e-10)


class TestClassicalFrequency:
    def test_degree_one(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 128, 512, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        assert np.nanmax(np.abs(prof.N - 1.0)) <= 1e-6

    def test_degree_two(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0] * x[..., 1], 1.0, 128, 512, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        assert np.nanmax(np.abs(prof.N - 2.0)) <= 1e-6

    def test_scaling_leaves_frequency_unchanged(self, linear_mode_spec):
        fld1 = sample_grid2d(lambda x: x[..., 0], 1.0, 64, 128, 1.5)
        fld3 = sample_grid2d(lambda x: 3.0 * x[..., 0], 1.0, 64, 128, 1.5)
        p1 = frequency_profile(linear_mode_spec, fld1)
        p3 = frequency_profile(linear_mode_spec, fld3)
        np.testing.assert_allclose(p3.N, p1.N, atol=1e-12)
        np.testing.assert_allclose(p3.H, 9.0 * p1.H, rtol=1e-12)

    def test_nonvanishing_solution_frequency_tends_to_zero(self, model_specs,
                                                           radial_solutions):
        spec = model_specs[(3, 1.5)]
        prof = frequency_profile(spec, radial_solutions[(3, 1.5)])
        assert abs(prof.N[0]) < 5e-3
        assert abs(prof.N[0]) < abs(prof.N[-1])

    def test_log_derivative_relation(self, linear_mode_spec):
        # d/dr log(H / r^{N-1}) = 2 N(r) / r in the plain-Laplacian case,
        # asserted within the derivative's own error estimate
        from freqlab.frequency import profile_derivative

        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 128, 256, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        y = np.log(prof.H / prof.r)
        dy, est, sl = profile_derivative(y, prof.step)
        target = 2 * prof.N[sl] / prof.r[sl]
        assert np.all(np.abs(dy[sl] - target) <= 20 * est[sl] + 1e-10)


class TestHPrime:
    def test_linear_field_closed_form(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 128, 256, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        rep = verify_H_prime(linear_mode_spec, fld, prof, tolerance=1e-10)
        assert rep.passed

    def test_radial_solutions(self, model_specs, radial_solutions):
        for key in ((2, 1.5), (3, 1.5)):
            prof = frequency_profile(model_specs[key], radial_solutions[key])
            rep = verify_H_prime(model_specs[key], radial_solutions[key], prof,
                                 tolerance=1e-6)
            assert rep.passed, f"{key}: {rep.rel_residual}"

    def test_general_form_matches_model_form_for_identity(self, model_specs,
                                                          radial_solutions):
        key = (3, 1.5)
        prof = frequency_profile(model_specs[key], radial_solutions[key])
        rep = verify_H_prime(model_specs[key], radial_solutions[key], prof)
        sl = slice(2, len(prof.r) - 2)
        np.testing.assert_allclose(rep.rhs, rep.details["model_form_rhs"],
                                   rtol=1e-12)


class TestPohozaev:
    def test_rellich_for_linear_field(self, linear_mode_spec):
        # with f = 0 the identity is the classical one; u = x1 satisfies it
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 128, 256, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        rep = verify_pohozaev_model(linear_mode_spec, fld, prof, tolerance=1e-8)
        assert rep.passed

    def test_radial_solutions_all_pairs(self, model_specs, radial_solutions):
        for key in ((2, 1.0), (3, 1.0), (2, 1.5), (3, 1.5)):
            spec, fld = model_specs[key], radial_solutions[key]
            prof = frequency_profile(spec, fld)
            rep = verify_pohozaev_model(spec, fld, prof, tolerance=1e-6)
            assert rep.passed, f"{key}: {rep.rel_residual}"

    def test_glued_field_defect_equals_correction(self, glued_trio):
        spec = ProblemSpec.model(2, 1.5, outer_radius=0.8)
        fld = glued_trio[(2, 1.5, 0.3)]
        prof = frequency_profile(spec, fld)
        rep = verify_pohozaev_model(spec, fld, prof, tolerance=1e-4)
        assert rep.passed
        defect = np.asarray(rep.details["uncorrected_defect"])
        corr = np.asarray(rep.details["correction_term"])
        big = np.abs(defect) > 1e-3 * np.max(np.abs(defect))
        assert big.any()
        np.testing.assert_allclose(defect[big], corr[big], rtol=1e-4)


class TestRellichGeneral:
    def test_manufactured_256(self, bowl, bowl_field_256):
        prof = frequency_profile(bowl.spec, bowl_field_256)
        rep9, rep10 = verify_rellich_general(bowl.spec, bowl_field_256, prof,
                                             tolerance=5e-6)
        assert rep9.passed and rep10.passed

    def test_identity_coefficients_reduce_to_model(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0] * x[..., 1], 1.0, 96, 192, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        rep9, rep10 = verify_rellich_general(linear_mode_spec, fld, prof,
                                             tolerance=1e-8)
        assert rep9.passed and rep10.passed
        # with A = id the z-jacobian term is -2 D1 exactly
        t4 = np.asarray(rep9.details["terms"]["z_jacobian"])
        np.testing.assert_allclose(t4, -2.0 * prof.D1, rtol=1e-10)

    def test_constant_field_everything_vanishes(self, bowl):
        fld = sample_grid2d(lambda x: np.full(x.shape[:-1], 0.25), 1.0,
                            64, 128, 1.5)
        prof = frequency_profile(bowl.spec, fld)
        rep9, _ = verify_rellich_general(bowl.spec, fld, prof)
        assert np.max(np.abs(rep9.lhs)) < 1e-12


class TestNPrimeBound:
    def test_radial_solutions(self, model_specs, radial_solutions):
        for key, spec in model_specs.items():
            fld = radial_solutions[key]
            prof = frequency_profile(spec, fld)
            rep = verify_N_prime_bound(spec, fld, prof)
            assert rep.details["inequality_ok"], key
            assert rep.details["cs_gap_ok"], key

    def test_radial_case_is_equality(self, model_specs, radial_solutions):
        # cs_gap = 0 for radial fields, so the corrected bound is an equality
        key = (3, 1.5)
        prof = frequency_profile(model_specs[key], radial_solutions[key])
        rep = verify_N_prime_bound(model_specs[key], radial_solutions[key], prof)
        eq = np.asarray(rep.details["equality_residual"])
        scale = np.nanmax(np.abs(rep.lhs))
        assert np.nanmax(np.abs(eq)) <= 1e-6 * scale
        assert np.nanmax(np.abs(rep.details["cs_gap"])) <= 1e-10

    def test_2d_gap_nonnegative(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0] + 0.3 * x[..., 1] ** 2,
                            1.0, 96, 192, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        rep = verify_N_prime_bound(linear_mode_spec, fld, prof)
        assert rep.details["cs_gap_ok"]
        assert np.nanmin(rep.details["cs_gap"]) >= -1e-10


class TestOtherChecks:
    def test_u2_bound_constant_ratio(self, model_specs, radial_solutions):
        for key, spec in model_specs.items():
            prof = frequency_profile(spec, radial_solutions[key])
            rep = verify_u2_bounds(spec, radial_solutions[key], prof)
            assert rep.details["inequality_ok"], key
            ceiling = rep.details["ceiling"]
            assert np.max(rep.details["effective_constant"]) <= ceiling * (1 + 1e-9)

    def test_f_transport_radial_and_grid(self, model_specs, radial_solutions,
                                         bowl, bowl_field_128):
        key = (3, 1.5)
        prof = frequency_profile(model_specs[key], radial_solutions[key])
        rep = verify_f_transport(model_specs[key], radial_solutions[key], prof,
                                 tolerance=1e-8)
        assert rep.passed
        assert rep.details["surface_convexity_ok"]
        prof2 = frequency_profile(bowl.spec, bowl_field_128)
        rep2 = verify_f_transport(bowl.spec, bowl_field_128, prof2,
                                  tolerance=5e-5)
        assert rep2.passed and rep2.details["surface_convexity_ok"]

    def test_surface_volume_energy_agreement(self, model_specs,
                                             radial_solutions):
        for key, spec in model_specs.items():
            prof = frequency_profile(spec, radial_solutions[key])
            rep = verify_surface_volume_D(spec, radial_solutions[key], prof,
                                          tolerance=1e-8)
            assert rep.passed, f"{key}: {rep.rel_residual}"

    def test_d_monotone_and_nonnegative(self, model_specs, radial_solutions):
        for key, spec in model_specs.items():
            prof = frequency_profile(spec, radial_solutions[key])
            assert np.all(prof.d >= -1e-300)
            assert np.all(np.diff(prof.d) >= -1e-15 * prof.d[-1])
            assert np.all(prof.dprime >= 0)


class TestZField:
    def test_radial_component_identity(self):
        pts = np.array([[0.3, 0.1], [0.0, 0.5], [-0.2, -0.4]])
        for make in (CoefficientField.identity(2),
                     CoefficientField.rotation_perturbed(0.25, 2),
                     CoefficientField.diagonal([2.0, 0.5])):
            z = ZField.sample(make, pts)
            np.testing.assert_allclose(z.radial_component_defect(), 0.0,
                                       atol=1e-12)

    def test_identity_divergence(self):
        pts = np.array([[0.3, 0.1], [0.1, -0.5]])
        z = ZField.sample(CoefficientField.identity(2), pts)
        np.testing.assert_allclose(z.divergence, 2.0, atol=1e-13)


class TestRadial2dAgreement:
    def test_frequency_profiles_match(self):
        # radial step commensurate with the ring spacing: shared radii exist
        spec = ProblemSpec.model(2, 1.5, outer_radius=1.0)
        rad = solve_radial(spec, 0.5, h=1.0 / 6400)
        trace = float(rad.u[-1])
        fld = solve_grid_2d(spec, lambda th: np.full_like(th, trace),
                            n_r=64, n_theta=64, tol=1e-12, max_iters=300)
        p2 = frequency_profile(spec, fld, ProfileControls(n_radii=40, r_min=0.2))
        # full-resolution radial profile: every ring radius is a node
        p1 = frequency_profile(spec, rad,
                               ProfileControls(n_radii=10 ** 6, r_min=0.1))
        i1 = np.searchsorted(np.round(p1.r, 10), np.round(p2.r, 10))
        assert np.allclose(p1.r[i1], p2.r, atol=1e-12)
        assert len(p2.r) >= 10
        np.testing.assert_allclose(p2.N, p1.N[i1], atol=2e-3)

    def test_verdicts_stable_under_refinement(self, bowl, bowl_field_128,
                                              bowl_field_256):
        p1 = frequency_profile(bowl.spec, bowl_field_128)
        p2 = frequency_profile(bowl.spec, bowl_field_256)
        r1 = run_all_identity_checks(bowl.spec, bowl_field_128, p1)
        r2 = run_all_identity_checks(bowl.spec, bowl_field_256, p2)
        for name in r1:
            assert r1[name].passed == r2[name].passed == True  # noqa: E712


class TestIntegralRadiusArgument:
    def test_scalar_at_radius(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: np.ones(x.shape[:-1]), 1.0, 64, 128, 1.5)
        val = sphere_integral(linear_mode_spec, fld, fld.u ** 2, r=1.0)
        assert val == pytest.approx(2 * np.pi, rel=1e-13)
        area = ball_integral(linear_mode_spec, fld, np.ones_like(fld.u), r=0.5)
        assert area == pytest.approx(np.pi * 0.25, rel=1e-10)

    def test_radius_beyond_grid_raises(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: np.ones(x.shape[:-1]), 1.0, 32, 64, 1.5)
        with pytest.raises(ValueError):
            sphere_integral(linear_mode_spec, fld, fld.u, r=1.5)


class TestNPrimeDegenerateEquality:
    def test_linear_degree_one_all_zero(self, linear_mode_spec):
        # N == 1, N' == 0, bound RHS == 0, quadratic-form gap == 0
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 96, 192, 1.5)
        prof = frequency_profile(linear_mode_spec, fld)
        rep = verify_N_prime_bound(linear_mode_spec, fld, prof)
        assert np.nanmax(np.abs(rep.lhs)) <= 1e-7       # N' == 0
        assert np.nanmax(np.abs(rep.rhs)) <= 1e-12      # RHS == 0
        assert np.nanmax(np.abs(rep.details["cs_gap"])) <= 1e-12
        assert rep.details["inequality_ok"]


class TestU2BoundEquality:
    def test_homogeneous_default_floor_attains_ceiling(self, model_specs,
                                                       radial_solutions):
        # radial fields are constant on spheres: the bound is an equality
        # when kappa2 takes its canonical value eps0^q / q
        key = (3, 1.5)
        spec, fld = model_specs[key], radial_solutions[key]
        prof = frequency_profile(spec, fld)
        rep = verify_u2_bounds(spec, fld, prof)
        ceff = np.asarray(rep.details["effective_constant"])
        pos = prof.dprime > 1e-30
        np.testing.assert_allclose(ceff[pos], rep.details["ceiling"],
                                   rtol=1e-12)


class TestTransportWithVariableCoefficientF:
    def test_explicit_grad1F_term(self):
        # x-dependent primitive: the transport identity needs the explicit
        # <grad_x F, Z> volume term, exact for any smooth field
        from freqlab.model import PowerTerm

        coef = lambda x: 1.0 + 0.5 * x[..., 0] ** 2
        cgrad = lambda x: np.stack([x[..., 0], np.zeros_like(x[..., 0])],
                                   axis=-1)
        nl = NonlinearitySpec.sum_of_powers([PowerTerm(1.5, coef, cgrad)],
                                            eps0=2.0, kappa1=2.0, kappa2=0.5)
        bowlA = CoefficientField.from_expressions(
            2, {"a11": "1 + x1^2/4", "a12": "0", "a22": "1"}, 0.7)
        spec = ProblemSpec(2, 1.0, bowlA, nl)
        fld = sample_grid2d(lambda x: (1 - x[..., 0] ** 2 - x[..., 1] ** 2) ** 2,
                            1.0, 128, 256, q=1.5)
        prof = frequency_profile(spec, fld)
        rep = verify_f_transport(spec, fld, prof, tolerance=5e-6)
        assert rep.passed, rep.rel_residual
        g1 = np.asarray(rep.details["grad1F_term"])
        # the term genuinely participates: dropping it would break the
        # identity by orders of magnitude more than the verified residual
        assert np.max(np.abs(g1)) > 1e-4
        assert np.max(np.abs(g1)) > 100 * np.max(rep.abs_residual)


class TestCacheSafety:
    def test_distinct_specs_never_alias(self, linear_mode_spec):
        import gc

        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 32, 64, 1.5)
        prof1 = frequency_profile(linear_mode_spec, fld)
        # churn through many short-lived specs to invite id() reuse
        for _ in range(50):
            tmp = ProblemSpec.model(2, 1.5, outer_radius=1.0)
            frequency_profile(tmp, fld)
            del tmp
            gc.collect()
        prof2 = frequency_profile(linear_mode_spec, fld)
        np.testing.assert_array_equal(prof1.N, prof2.N)


class TestConcurrentAudits:
    def test_threaded_audits_match_serial(self, model_specs, radial_solutions):
        import concurrent.futures
        import json

        from freqlab.audit import audit

        keys = list(model_specs)

        def run(key):
            # fresh field object per task: no shared caches between threads
            from freqlab.fields import SolutionField

            src = radial_solutions[key]
            fld = SolutionField.radial_from_arrays(src.r, src.u, src.du,
                                                   src.dim, src.q)
            fld.residual_scale = src.residual_scale
            return json.dumps(audit(model_specs[key], fld).to_dict(),
                              sort_keys=True)

        serial = [run(k) for k in keys]
        with concurrent.futures.ThreadPoolExecutor(4) as pool:
            threaded = list(pool.map(run, keys))
        assert serial == threaded


class TestGeneralRouteRadialHPrime:
    def test_rotation_perturbed_reduces_exactly(self, radial_solutions):
        # A nu = nu on radial gradients for this family, so the general
        # divergence term must coincide with (N-1)/r H exactly
        src = radial_solutions[(2, 1.5)]
        from freqlab.fields import SolutionField

        fld = SolutionField.radial_from_arrays(src.r, src.u, src.du, 2, 1.5)
        spec = ProblemSpec(2, 1.5, CoefficientField.rotation_perturbed(0.2, 2),
                           NonlinearitySpec.homogeneous(1.5))
        prof = frequency_profile(spec, fld)
        rep = verify_H_prime(spec, fld, prof, tolerance=1e-6)
        assert rep.passed, rep.rel_residual
        np.testing.assert_allclose(rep.rhs, rep.details["model_form_rhs"],
                                   rtol=1e-10)


class TestCoarseGridGuard:
    def test_too_few_radii_raises_clearly(self, linear_mode_spec):
        fld = sample_grid2d(lambda x: x[..., 0], 1.0, 8, 16, 1.5)
        with pytest.raises(ValueError, match="too coarse"):
            frequency_profile(linear_mode_spec, fld)


class TestCorrectedEqualityOnNonSolution:
    def test_glued_field_satisfies_the_corrected_derivative_equality(self):
        # the corrected frequency-derivative equality holds for ANY smooth
        # field once the residual terms are kept; on the glued candidate
        # N' spans three orders of magnitude and the equality tracks it
        # within the differentiation budget
        from freqlab.fields import glued_field

        spec = ProblemSpec.model(2, 1.5, outer_radius=0.8)
        fld = glued_field(2, 1.5, 0.3, 0.8, h=1e-3)
        prof = frequency_profile(spec, fld, ProfileControls(n_radii=10 ** 6))
        rep = verify_N_prime_bound(spec, fld, prof)
        eq = np.asarray(rep.details["equality_residual"])
        ok = np.isfinite(eq) & np.isfinite(rep.lhs)
        assert ok.sum() > 100
        rel = np.abs(eq[ok]) / np.maximum(np.abs(rep.lhs[ok]), 1.0)
        assert np.max(rel) <= 0.01
