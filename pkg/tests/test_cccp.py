import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from boundopt import cccp, diagnostics, numerics
from boundopt.core import StopRule, run

ENERGY = np.polynomial.Polynomial(cccp.QUARTIC)
CRITICAL = sorted([brentq(ENERGY.deriv(), -2, -1), brentq(ENERGY.deriv(), 0.5, 1.5)])


class TestDecompositions:
    @pytest.mark.parametrize("name", sorted(cccp.QUARTIC_BENCH))
    def test_sum_is_the_quartic(self, name):
        d = cccp.QUARTIC_BENCH[name]
        for x in np.linspace(-3, 3, 13):
            assert d.energy(np.array([x])) == pytest.approx(ENERGY(x), abs=1e-10)

    @pytest.mark.parametrize("name", sorted(cccp.QUARTIC_BENCH))
    def test_convex_concave(self, name):
        assert cccp.QUARTIC_BENCH[name].is_convex_concave([np.array([x]) for x in np.linspace(-5, 5, 41)])

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            cccp.get_decomposition("dec9")


class TestStep:
    def test_linear_cave_lands_on_minimizer(self):
        d = cccp.polynomial_decomposition("lin", [0, 0, 2], [0, -3])
        # E = 2x^2 - 3x, minimum at 3/4
        np.testing.assert_allclose(cccp.cccp_step(d, [5.0]), [0.75], atol=1e-12)

    @pytest.mark.parametrize("name", sorted(cccp.QUARTIC_BENCH))
    def test_converges_to_critical_point(self, name):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH[name])
        res = run(imap, [2.0], StopRule(1e-10, 100_000))
        assert res.converged
        # the objective-change stop is second order in the distance, so polish before checking stationarity
        x = diagnostics.refine_fixed_point(imap, res.final)[0]
        assert abs(ENERGY.deriv()(x)) <= 1e-10
        assert min(abs(x - c) for c in CRITICAL) <= 1e-10

    def test_same_limit_different_counts(self):
        runs = {n: run(cccp.CCCPMap(d), [2.0], StopRule(1e-10, 100_000)) for n, d in cccp.QUARTIC_BENCH.items()}
        limits = [diagnostics.refine_fixed_point(cccp.CCCPMap(cccp.QUARTIC_BENCH[n]), r.final)[0] for n, r in runs.items()]
        assert max(limits) - min(limits) <= 1e-8
        assert runs["dec1"].iterations < runs["dec2"].iterations < runs["dec3"].iterations

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3.0, 3.0), st.sampled_from(sorted(cccp.QUARTIC_BENCH)))
    def test_energy_never_increases(self, x0, name):
        res = run(cccp.CCCPMap(cccp.QUARTIC_BENCH[name]), [x0], StopRule(1e-12, 500))
        assert res.curve.is_monotone()


class TestRate:
    @pytest.mark.parametrize("name,rate", [("dec1", 0.5), ("dec2", 0.8125), ("dec3", 0.95)])
    def test_closed_form(self, name, rate):
        d = cccp.QUARTIC_BENCH[name]
        M = cccp.cccp_rate_matrix(d, [1.0])
        assert M[0, 0] == pytest.approx(rate, abs=1e-12)
        J = numerics.fd_jacobian(lambda x: cccp.cccp_step(d, x), np.array([1.0]))
        assert J[0, 0] == pytest.approx(rate, abs=1e-6)
        assert cccp.decomposition_ratio_score(d, [1.0]) == pytest.approx(rate)

    def test_constant_cave_scores_zero(self):
        d = cccp.polynomial_decomposition("flat", [0, 0, 1], [4.0])
        assert cccp.decomposition_ratio_score(d, [0.3]) == 0.0

    @pytest.mark.parametrize("mu", [0.1, 1.0, 5.0])
    def test_curvature_shift_keeps_energy_and_slows(self, mu):
        d = cccp.QUARTIC_BENCH["dec1"]
        shifted = cccp.add_curvature_shift(d, mu)
        for x in (-1.0, 0.5, 2.0):
            assert shifted.energy(np.array([x])) == pytest.approx(d.energy(np.array([x])), abs=1e-12)
        assert cccp.decomposition_ratio_score(shifted, [1.0]) > cccp.decomposition_ratio_score(d, [1.0])

    def test_bound_majorizes(self):
        imap = cccp.CCCPMap(cccp.QUARTIC_BENCH["dec2"])
        for x in np.linspace(-2, 2, 9):
            for p in np.linspace(-2, 2, 9):
                assert imap.bound([x], [p]) <= imap.objective([x]) + 1e-9
