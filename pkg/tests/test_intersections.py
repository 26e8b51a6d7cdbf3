import math

import numpy as np
import pytest

from gelfand2d.bifurcation import canonical_trajectory
from gelfand2d.errors import DomainError, NonSolutionError
from gelfand2d.integrator import picard_solve, transform_r_to_t
from gelfand2d.intersections import (SturmPair, family_value, intersection_count,
                                     linearized_pair, separation_check, sturm_wronskian_defect,
                                     zero_before_e)
from gelfand2d.model import (ProblemConfig, linearization_eigenvalues, oscillation_predicate,
                             r_of_t)

E = ProblemConfig.exponential
P = ProblemConfig.power


class TestFamily:
    def test_zero_shift(self):
        for cfg in (E(1), P(1, 4)):
            beta = math.log(cfg.k) if not cfg.is_power else 1.0
            assert cfg.shift(beta) == pytest.approx(0.0, abs=1e-15)
            traj = canonical_trajectory(cfg)
            w, dw = family_value(cfg, traj, beta, 0.0)
            w0, dw0 = traj(0.0)
            assert float(w) == float(w0) and float(dw) == float(dw0)

    def test_self_difference(self):
        t = np.linspace(-30, 5, 200)
        a = family_value(E(1), None, 1.5, t)[0]
        b = family_value(E(1), None, 1.5, t)[0]
        assert np.all(a - b == 0)

    @pytest.mark.parametrize("cfg, beta", [(E(1), 2.0), (E(0.2), 1.0), (P(1, 4), 2.0),
                                           (P(0.1, 2), 1.0)])
    def test_matches_picard(self, cfg, beta):
        tr = transform_r_to_t(cfg, picard_solve(cfg, beta, t_stop=-8.0))
        t = np.linspace(-8.0, 20.0, 300)
        assert np.max(np.abs(tr(t)[0] - family_value(cfg, None, beta, t)[0])) <= 1e-6


class TestIntersections:
    def test_exp_subcritical_none(self):
        res = intersection_count(E(0.2), 1.0, 2.0, (-40.0, 10.0))
        assert res.count == 0

    def test_exp_supercritical(self):
        cfg = E(1)
        res = intersection_count(cfg, 1.0, 2.0, (-40.0, 0.0))
        assert res.count >= 8
        lp, _ = linearization_eigenvalues(cfg)
        period = 2 * math.pi / lp.imag
        assert period == pytest.approx(7.255, abs=1e-3)
        assert abs(res.period - period) <= 0.1 * period
        assert abs(res.half_period - period / 2) <= 0.1 * period / 2

    def test_pow_supercritical(self):
        res = intersection_count(P(1, 4), 1.0, 2.0, (-40.0, 5.0))
        assert res.count >= 5

    def test_locations(self):
        res = intersection_count(E(1), 1.0, 2.0, (-40.0, 0.0))
        assert np.all(np.diff(res.locations_t) < 0)
        near = res.locations_t > -30
        assert np.all(np.isfinite(res.locations_r[near]))
        assert np.all(np.isnan(res.locations_r[~near]))
        for t in res.locations_t:
            d = family_value(E(1), None, 2.0, t)[0] - family_value(E(1), None, 1.0, t)[0]
            assert abs(float(d)) < 1e-9

    def test_interleaving(self):
        # exactly one extremum of the difference between consecutive crossings
        cfg = E(1)
        res = intersection_count(cfg, 1.0, 2.0, (-40.0, 0.0))
        t = np.linspace(-40, 0, 40001)
        dd = family_value(cfg, None, 2.0, t)[1] - family_value(cfg, None, 1.0, t)[1]
        sgn = np.sign(dd)
        ext = t[1:][sgn[1:] != sgn[:-1]]
        for hi, lo in zip(res.locations_t[:-1], res.locations_t[1:]):
            assert np.count_nonzero((ext > lo) & (ext < hi)) == 1

    def test_bad_order(self):
        with pytest.raises(DomainError):
            intersection_count(E(1), 2.0, 1.0)
        with pytest.raises(DomainError):
            intersection_count(E(1), 1.0, 2.0, (0.0, -1.0))


class TestSeparation:
    def test_exp_subcritical(self):
        res = separation_check(E(0.2), 1.0, 2.0)
        assert res.separated and res.margin_order > 0 and res.margin_singular > 0

    def test_pow_above_jl(self):
        assert separation_check(P(0.1, 2), 1.0, 2.0)

    def test_exp_supercritical(self):
        res = separation_check(E(1), 1.0, 2.0)
        assert not res.separated
        assert res.first_crossing is not None and -40 <= res.first_crossing <= 5

    @pytest.mark.parametrize("cfg", [E(0.1), E(0.2), E(0.5), E(1), E(3), P(1, 4), P(0.1, 2),
                                     P(0.1, 1.3), P(1, 10)])
    def test_dichotomy(self, cfg):
        sep = separation_check(cfg, 1.0, 2.0)
        many = intersection_count(cfg, 1.0, 2.0).count >= 3
        assert sep.separated != many
        assert many == oscillation_predicate(cfg)


class TestZero:
    def test_subcritical(self):
        cfg = P(1, 2.5)
        z1 = zero_before_e(cfg, 1.0)
        z10 = zero_before_e(cfg, 10.0)
        assert z1 and z10
        assert z10.t_event != z1.t_event
        assert z10.t_event - z1.t_event == pytest.approx(math.log(10) / cfg.theta)

    def test_location_matches_picard(self):
        cfg = P(1, 2.5)
        beta = 20.0
        z = zero_before_e(cfg, beta)
        sol = picard_solve(cfg, beta)
        assert sol.zero_crossing is not None
        assert z.t_event == pytest.approx(sol.zero_crossing, abs=1e-6)
        assert z.r0 == pytest.approx(float(r_of_t(sol.zero_crossing)), rel=1e-6)

    def test_supercritical(self):
        assert not zero_before_e(P(1, 4), 1.0)
        assert not zero_before_e(P(1, 3), 1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            zero_before_e(E(1), 1.0)
        with pytest.raises(DomainError):
            zero_before_e(P(1, 2.5), 0.0)


class TestSturm:
    def test_trig_pair(self):
        t = np.linspace(0, 10, 20001)
        one = np.ones_like(t)
        pair = SturmPair(0.0, t, one, one, np.sin(t), np.cos(t), np.cos(t), -np.sin(t))
        assert sturm_wronskian_defect(pair) <= 1e-9
        assert np.allclose(pair.dz * pair.y - pair.dy * pair.z, -1.0)

    def test_damped_constant_bracket(self):
        q, a = 0.7, 2.0
        om = math.sqrt(a - q * q / 4)
        t = np.linspace(0, 6, 12001)
        env = np.exp(-q * t / 2)
        y = env * np.sin(om * t)
        dy = env * (om * np.cos(om * t) - q / 2 * np.sin(om * t))
        z = env * np.cos(om * t)
        dz = env * (-om * np.sin(om * t) - q / 2 * np.cos(om * t))
        pair = SturmPair(q, t, np.full_like(t, a), np.full_like(t, a), y, dy, z, dz)
        bracket = np.exp(q * t) * (dz * y - dy * z)
        assert np.ptp(bracket) <= 1e-8
        assert sturm_wronskian_defect(pair) <= 1e-8

    def test_linearized_pair(self):
        pair = linearized_pair(E(1), 1.0, 2.0, (-30.0, 0.0), n=6001)
        assert sturm_wronskian_defect(pair, (-30.0, 0.0)) <= 1e-7
        bracket = np.exp(pair.q * pair.t) * (pair.dz * pair.y - pair.dy * pair.z)
        # where y z > 0 the bracket moves with the sign of a - b
        dbr = np.gradient(bracket, pair.t)
        yz = pair.y * pair.z
        ok = (yz > 1e-3 * np.max(np.abs(yz))) & (np.abs(pair.a - pair.b) > 1e-6)
        assert np.all(np.sign(dbr[ok]) == np.sign(pair.a - pair.b)[ok])

    def test_nonsolution_rejected(self):
        t = np.linspace(0, 5, 1001)
        one = np.ones_like(t)
        pair = SturmPair(0.0, t, one, one, t ** 2, 2 * t, np.cos(t), -np.sin(t))
        with pytest.raises(NonSolutionError):
            sturm_wronskian_defect(pair)

    def test_grid_checks(self):
        with pytest.raises(DomainError):
            SturmPair(0.0, [0, 1, 2], [1] * 3, [1] * 3, [0] * 3, [0] * 3, [0] * 3, [0] * 3)
        t = np.array([0, 1, 2, 4, 5, 6.0])
        with pytest.raises(DomainError):
            SturmPair(0.0, t, t, t, t, t, t, t)
