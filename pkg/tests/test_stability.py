import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson

from gelfand2d.errors import DomainError
from gelfand2d.model import ProblemConfig, hardy_coefficient
from gelfand2d.stability import (MorseIndex, PiecewiseLinearTestFunction, TestFunctionBand,
                                 destabilizing_band, hardy_quadratic_form, morse_classification)

E = ProblemConfig.exponential
P = ProblemConfig.power
PI2_4 = math.pi ** 2 / 4


def _random_pl(rng, n_nodes=None):
    n = n_nodes or int(rng.integers(3, 12))
    a = rng.uniform(0.0, 5.0)
    nodes = a + np.cumsum(rng.uniform(0.05, 3.0, n))
    nodes = np.concatenate([[a], nodes])
    vals = rng.normal(size=nodes.size) * np.exp(rng.uniform(-3, 3))
    vals[0] = vals[-1] = 0.0
    return PiecewiseLinearTestFunction(tuple(nodes), tuple(vals))


def _direct_form(c, phi, R=math.e, n=400001):
    """Q in the unscaled form 2 pi int (phi'^2 - c phi^2) e^{-tau} dtau by Simpson's rule."""
    a, b = phi.support
    tau = np.linspace(a, b, n)
    h = 1e-6
    p = phi.phi(tau)
    dp = (phi.phi(tau + h) - phi.phi(tau - h)) / (2 * h)
    f = (dp * dp - c * p * p) * np.exp(-tau)
    return 2 * math.pi * simpson(f, x=tau)


class TestBand:
    def test_support(self):
        assert destabilizing_band(0.5, 0).support == pytest.approx((0.0, 4 * math.pi))
        assert destabilizing_band(0.5, 1).support == pytest.approx((4 * math.pi, 8 * math.pi))

    def test_vanishes_at_ends(self):
        band = destabilizing_band(0.5, 2)
        a, b = band.support
        assert abs(float(band.scaled(a)[0])) < 1e-12
        assert abs(float(band.scaled(b)[0])) < 1e-12

    def test_disjoint(self):
        for n in range(4):
            assert destabilizing_band(0.3, n).support[1] == destabilizing_band(0.3, n + 1).support[0]

    @pytest.mark.parametrize("eps, n", [(0.0, 0), (1.0, 0), (-0.2, 0), (0.5, -1), (0.5, 1.5)])
    def test_domain(self, eps, n):
        with pytest.raises(DomainError):
            destabilizing_band(eps, n)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_negative_at_threshold(self, n):
        assert hardy_quadratic_form(0.375, destabilizing_band(0.5, n)) == pytest.approx(
            -PI2_4, rel=1e-6)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_positive_at_hardy_constant(self, n):
        assert hardy_quadratic_form(0.25, destabilizing_band(0.5, n)) == pytest.approx(
            PI2_4, rel=1e-6)

    def test_near_one(self):
        q = hardy_quadratic_form(0.475, destabilizing_band(0.9, 0))
        assert q == pytest.approx(-0.05 * math.pi ** 2, rel=1e-6)

    @pytest.mark.parametrize("eps, c", [(0.2, 0.1), (0.7, 1.3), (0.5, 0.3)])
    def test_closed_form(self, eps, c):
        band = destabilizing_band(eps, 1)
        assert hardy_quadratic_form(c, band) == pytest.approx(band.closed_form(c), rel=1e-8)

    def test_unscaled_integrand(self):
        band = TestFunctionBand(0.5, 0)
        assert _direct_form(0.375, band) == pytest.approx(-PI2_4, rel=1e-6)

    def test_general_radius(self):
        band = TestFunctionBand(0.5, 1, R=3.0)
        assert hardy_quadratic_form(0.375, band, R=3.0) == pytest.approx(-PI2_4, rel=1e-6)
        # for R > e the n = 0 band would reach r = R/e > 1
        with pytest.raises(DomainError):
            hardy_quadratic_form(0.375, TestFunctionBand(0.5, 0, R=3.0), R=3.0)


class TestForm:
    def test_zero_function(self):
        phi = PiecewiseLinearTestFunction((0.0, 1.0, 2.0), (0.0, 0.0, 0.0))
        assert hardy_quadratic_form(0.3, phi) == 0.0

    def test_must_vanish(self):
        phi = PiecewiseLinearTestFunction((0.0, 1.0, 2.0), (0.0, 1.0, 0.5))
        with pytest.raises(DomainError):
            hardy_quadratic_form(0.25, phi)

    def test_support_inside_ball(self):
        phi = PiecewiseLinearTestFunction((-1.0, 0.0, 1.0), (0.0, 1.0, 0.0))
        with pytest.raises(DomainError):
            hardy_quadratic_form(0.25, phi)

    def test_unbounded(self):
        class Unbounded(TestFunctionBand):
            @property
            def support(self):
                return (0.0, math.inf)

        with pytest.raises(DomainError):
            hardy_quadratic_form(0.25, Unbounded(0.5, 0))

    def test_bad_nodes(self):
        with pytest.raises(DomainError):
            PiecewiseLinearTestFunction((0.0, 0.0, 1.0), (0.0, 1.0, 0.0))
        with pytest.raises(DomainError):
            PiecewiseLinearTestFunction((0.0, 1.0), (0.0,))

    def test_pl_against_direct(self):
        phi = PiecewiseLinearTestFunction((0.0, 1.0, 2.5, 4.0), (0.0, 2.0, -1.0, 0.0))
        # exact per-piece integrals of a linear phi against e^{-tau}
        mp.mp.dps = 30
        total = mp.mpf(0)
        x, y = phi.nodes, phi.values
        for i in range(len(x) - 1):
            m = mp.mpf(y[i + 1] - y[i]) / (x[i + 1] - x[i])
            lin = lambda t, i=i, m=m: y[i] + m * (t - x[i])
            total += mp.quad(lambda t: (m * m - mp.mpf(0.3) * lin(t) ** 2) * mp.e ** (-t),
                             [x[i], x[i + 1]])
        assert hardy_quadratic_form(0.3, phi) == pytest.approx(float(2 * mp.pi * total), rel=1e-9)

    def test_hardy_inequality_random(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            assert hardy_quadratic_form(0.25, _random_pl(rng)) >= -1e-9

    def test_scaling(self):
        rng = np.random.default_rng(7)
        phi = _random_pl(rng, 6)
        for a in (0.1, 3.0, -2.0):
            scaled = PiecewiseLinearTestFunction(phi.nodes, tuple(a * v for v in phi.values))
            assert hardy_quadratic_form(0.4, scaled) == pytest.approx(
                a * a * hardy_quadratic_form(0.4, phi), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(c1=st.floats(0.0, 2.0), dc=st.floats(0.01, 2.0), seed=st.integers(0, 10_000))
    def test_monotone_in_c(self, c1, dc, seed):
        phi = _random_pl(np.random.default_rng(seed))
        assert hardy_quadratic_form(c1, phi) > hardy_quadratic_form(c1 + dc, phi)


class TestMorse:
    @pytest.mark.parametrize("cfg, morse", [
        (E(0.2), MorseIndex.ZERO), (E(0.25), MorseIndex.ZERO), (E(1), MorseIndex.INFINITE),
        (P(1, 2.5), MorseIndex.INFINITE), (P(1, 4), MorseIndex.INFINITE),
        (P(0.1, 2), MorseIndex.ZERO), (P(0.1, 1.14), MorseIndex.ZERO),
        (P(0.1, 1.15), MorseIndex.INFINITE),
    ])
    def test_verdicts(self, cfg, morse):
        report = morse_classification(cfg)
        assert report.morse == morse
        assert report.c == hardy_coefficient(cfg)
        assert report.threshold_margin == pytest.approx(report.c - 0.25)

    @pytest.mark.parametrize("cfg", [E(1), P(1, 4), P(1, 2.5), E(0.26)])
    def test_negative_bands(self, cfg):
        report = morse_classification(cfg)
        assert len(report.band_values) >= 3
        assert all(q < 0 for _, _, q in report.band_values)
        eps = report.band_values[0][1]
        supports = [destabilizing_band(eps, n).support for n, _, _ in report.band_values]
        assert all(s[1] <= t[0] for s, t in zip(supports[:-1], supports[1:]))

    def test_pow_k1_p4(self):
        report = morse_classification(P(1, 4))
        assert report.c == pytest.approx(8 / 9)

    def test_as_dict(self):
        d = morse_classification(E(1)).as_dict()
        assert d["morse"] == "Infinite" and len(d["bands"]) == 3
        assert set(d) == {"c", "morse", "bands", "margin"}
