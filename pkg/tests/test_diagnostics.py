import numpy as np
import pytest

from boundopt import cccp, diagnostics, em, gis, nmf, numerics
from boundopt.core import StopRule, run
from boundopt.exceptions import InsufficientDataError, NotConvergedError

from conftest import QuadraticMap


def _converged_mog(separation, seed=0, n=200):
    data = em.gen_mog_data(separation, n, 1, seed)
    start = em.init_mog(data)
    imap = em.MoGEMMap(data, start)
    res = run(imap, imap.encode(start), StopRule(1e-14, 50_000), keep_trajectory=True, window=300)
    return imap, res, diagnostics.refine_fixed_point(imap, res.final)


class TestRateMatrix:
    def test_one_component_em_is_zero(self):
        data = np.random.default_rng(0).normal(size=(30, 1))
        start = em.MoGParams(np.array([1.0]), data.mean(axis=0)[None], np.cov(data.T, bias=True).reshape(1, 1, 1))
        imap = em.MoGEMMap(data, start)
        fp = imap.step(imap.encode(start))
        np.testing.assert_allclose(diagnostics.estimate_rate_matrix(imap, fp), 0.0, atol=1e-6)

    def test_cccp_dec1(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec1"])
        np.testing.assert_allclose(diagnostics.estimate_rate_matrix(imap, [1.0]), [[0.5]], atol=1e-7)

    def test_requires_fixed_point(self, gradient_step_map):
        with pytest.raises(NotConvergedError):
            diagnostics.estimate_rate_matrix(gradient_step_map, [5.0, 5.0])

    def test_refine_reaches_fixed_point(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec3"])
        fp = diagnostics.refine_fixed_point(imap, [1.01])
        assert fp[0] == pytest.approx(1.0, abs=1e-12)


class TestObservedRate:
    def test_linear_map(self):
        traj = [np.array([0.5 ** k]) for k in range(30)]
        assert diagnostics.observed_rate(traj, [0.0]) == pytest.approx(0.5, abs=1e-12)

    def test_cccp_dec2(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec2"])
        res = run(imap, [2.0], StopRule(1e-12, 1000), keep_trajectory=True)
        assert diagnostics.observed_rate(res.trajectory, [1.0]) == pytest.approx(0.8125, rel=0.1)

    def test_newton_is_superlinear(self, newton_map):
        traj = [np.array([3.0, 4.0])]
        for _ in range(5):
            traj.append(newton_map.step(traj[-1]))
        with pytest.raises(InsufficientDataError):
            diagnostics.observed_rate(traj, newton_map.c)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            diagnostics.observed_rate([np.array([1.0]), np.array([0.5])], [0.0])


class TestGauge:
    def test_gis_has_none(self):
        model = gis.random_maxent_model(np.random.default_rng(0), 8, 2)
        imap = gis.MaxentGISMap(model)
        theta = gis.solve_maxent(model)
        spec = numerics.eig(gis.gis_rate_matrix(model, theta), vectors=True)
        assert diagnostics.detect_gauge(spec, imap, theta) == 0

    def test_cccp_has_none(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec1"])
        spec = numerics.eig(cccp.cccp_rate_matrix(imap.decomposition, [1.0]), vectors=True)
        assert diagnostics.detect_gauge(spec, imap, np.array([1.0])) == 0


class TestConvergenceReport:
    def test_cccp_predicted_and_observed(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec3"])
        res = run(imap, [2.0], StopRule(1e-12, 5000), keep_trajectory=True)
        rep = diagnostics.convergence_report(imap, diagnostics.refine_fixed_point(imap, res.final), res.trajectory)
        assert rep.predicted_rate == pytest.approx(0.95, abs=1e-6)
        assert rep.relative_rate_error <= 0.1
        assert rep.gauge_dimensions == 0

    def test_overlapping_mog_rate(self):
        imap, res, fp = _converged_mog("overlapping")
        rep = diagnostics.convergence_report(imap, fp, res.trajectory)
        assert rep.predicted_rate > 0.5
        assert rep.relative_rate_error <= 0.1

    def test_nmf_excludes_factor_mixing(self):
        rng = np.random.default_rng(1)
        V = rng.uniform(0.5, 2.0, (3, 3))
        imap = nmf.NMFMap(V, 2)
        W, H = nmf.init_factors(V, 2, 1)
        res = run(imap, imap.encode(W, H), StopRule(1e-15, 100_000))
        fp = diagnostics.refine_fixed_point(imap, res.final)
        rep = diagnostics.convergence_report(imap, fp)
        assert rep.gauge_dimensions == 2
        assert rep.degenerate_dimensions == 4
        assert rep.predicted_rate < 1.0 - 1e-3

    def test_json_serializable(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec1"])
        rep = diagnostics.convergence_report(imap, np.array([1.0]))
        text = diagnostics.reports_to_json(rep)
        assert "predicted_rate" in text


class TestDirections:
    def test_isotropic_gradient_step(self):
        imap = QuadraticMap(2.0 * np.eye(3), np.zeros(3), 0.5 * np.eye(3))
        rep = diagnostics.direction_report(imap, np.array([1.0, -2.0, 0.5]))
        assert rep.cos_step_grad == pytest.approx(1.0)
        assert rep.cos_step_newton == pytest.approx(1.0)
        assert rep.cos_grad_newton == pytest.approx(1.0)

    def test_well_separated_mog_follows_newton(self):
        imap, res, fp = _converged_mog("well")
        probe = next(t for t in res.trajectory if diagnostics.near_fixed_point(imap, t)
                     and np.linalg.norm(imap.gradient(t)) > 1e-8)
        rep = diagnostics.direction_report(imap, probe)
        assert rep.cos_step_newton >= 0.99
        assert rep.cos_step_grad > 0

    def test_at_fixed_point_is_degenerate(self, newton_map):
        rep = diagnostics.direction_report(newton_map, newton_map.c)
        assert rep.degenerate and not rep.newton_defined

    def test_newton_undefined_for_indefinite_hessian(self):
        assert diagnostics.newton_direction(np.ones(2), np.diag([1.0, -1.0])) is None


class TestQuasiNewtonResidual:
    def test_exact_newton_is_zero(self, newton_map):
        x = np.array([4.0, 1.0])
        r = diagnostics.quasi_newton_residual(newton_map, x, np.zeros((2, 2)), newton_map.hessian(x))
        assert r <= 1e-12

    def test_gradient_step_matches_exactly_on_quadratic(self, gradient_step_map):
        m = gradient_step_map
        M = np.eye(2) - m.P @ m.A
        x = np.array([4.0, 1.0])
        assert diagnostics.quasi_newton_residual(m, x, M, m.hessian(x)) <= 1e-12

    def test_cccp_near_optimum(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec1"])
        x = np.array([1.001])
        r = diagnostics.quasi_newton_residual(imap, x, cccp.cccp_rate_matrix(imap.decomposition, [1.0]), imap.hessian(x))
        assert r <= 0.05

    def test_well_separated_mog(self):
        imap, res, fp = _converged_mog("well")
        probe = next(t for t in res.trajectory if diagnostics.near_fixed_point(imap, t)
                     and np.linalg.norm(imap.gradient(t)) > 1e-8)
        M = diagnostics.estimate_rate_matrix(imap, fp)
        r = diagnostics.quasi_newton_residual(imap, probe, M, numerics.fd_hessian(imap.gradient, probe))
        assert r <= 0.05
