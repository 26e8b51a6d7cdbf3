"""Bifurcation curves (beta, lambda(beta), alpha(beta)) from one canonical orbit.

Every regular solution is a shift of a single orbit w_hat(s) of the
autonomous system, with s_beta = -beta/k + (log k)/k (exponential) or
s_beta = -(log beta)/theta (power).  Hence

    lambda = k exp(w_hat(s_beta)),               alpha = beta - log(lambda)
    lambda = theta(1-theta) (w_hat(s_beta)+1)^(p-1),
    alpha  = lambda^(-1/(p-1)) beta - 1,

and turning points of the curve are the zeros of w_hat'.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ClassificationDiscrepancy, DomainError, InconclusiveError
from .integrator import (Trajectory, asymptotic_deviation, asymptotic_state, default_s0,
                         integrate_autonomous, lyapunov_value, picard_solve)
from .model import (ProblemConfig, critical_exponents, hardy_coefficient,
                    linearization_eigenvalues, singular_solution)

CANONICAL_RTOL = 1e-12
CANONICAL_MAX_STEP = 0.5
SERIES_ORDER = 8
CONVERGENCE_TOL = 1e-3
MIN_OSCILLATIONS = 3


class BifurcationType(str, enum.Enum):
    TYPE0 = "Type0"
    TYPEI = "TypeI"
    TYPEII = "TypeII"


# -- canonical orbit ----------------------------------------------------------

_cache: dict[ProblemConfig, Trajectory] = {}
_cache_lock = threading.Lock()


def clear_cache():
    with _cache_lock:
        _cache.clear()


def default_s_min(config: ProblemConfig) -> float:
    """Backward extent at which the linearised tail has decayed by ~e^-11.5.

    For p = p_c the orbit is homoclinic to w = -1 and the backward saddle
    amplifies errors, so the window is kept short.
    """
    if config.is_power:
        p_c = critical_exponents(config.k).p_c
        if math.isclose(config.p, p_c, rel_tol=0, abs_tol=1e-12):
            return -25.0
        if config.p < p_c:
            return -40.0
    rate = min(z.real for z in linearization_eigenvalues(config))
    return -min(200.0, max(40.0, 11.5 / rate))


def canonical_trajectory(config: ProblemConfig, s_min: float | None = None) -> Trajectory:
    """The beta-independent orbit, integrated backward from its asymptotic start.

    Results are cached per config; a cached orbit is reused whenever it
    already reaches ``s_min`` (or ended at the w = -1 event).  Queries with s
    above the start point are answered by the asymptotic series.
    """
    if s_min is None:
        s_min = default_s_min(config)
    with _cache_lock:
        traj = _cache.get(config)
        if traj is not None and (traj.s_lo <= s_min or traj.termination == "minus_one_event"):
            return traj
        s0 = default_s0(config, SERIES_ORDER)
        u, du = asymptotic_state(config, s0, SERIES_ORDER)
        w0 = float(u) - (1.0 if config.is_power else 0.0)
        ext = lambda s: asymptotic_state(config, s, SERIES_ORDER)
        traj = integrate_autonomous(config, (s0, w0, float(du)), s_min, rtol=CANONICAL_RTOL,
                                    extension=ext, max_step=CANONICAL_MAX_STEP)
        _cache[config] = traj
        return traj


# -- the curve map ---------------------------------------------------------------

def s_of_beta(config: ProblemConfig, beta):
    beta = np.asarray(beta, dtype=float)
    if config.is_power:
        return -np.log(beta) / config.theta
    return (math.log(config.k) - beta) / config.k


def beta_of_s(config: ProblemConfig, s):
    s = np.asarray(s, dtype=float)
    if config.is_power:
        return np.exp(-config.theta * s)
    return math.log(config.k) - config.k * s


def _lambda_alpha(config: ProblemConfig, traj: Trajectory, beta):
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if config.is_power and np.any(beta <= 0):
        raise DomainError("center-value", "beta <= 0", "power case requires beta > 0")
    s = s_of_beta(config, beta)
    u, _ = traj.state(s)
    u = np.atleast_1d(u)
    far = s > traj.s_hi  # series region: use the small deviation directly
    dev = np.zeros_like(s)
    if np.any(far):
        dev[far] = asymptotic_deviation(config, s[far], SERIES_ORDER)
    if config.is_power:
        th, p = config.theta, config.p
        if np.any(u <= 0):
            raise DomainError("center-value", "beta >= beta*",
                              "beta is at or beyond beta*, where the solution loses positivity")
        lam = th * (1.0 - th) * u ** (p - 1.0)
        amp = (th * (1.0 - th)) ** (th / config.k)
        alpha = beta / (amp * u) - 1.0
        alpha[far] = -dev[far] / (1.0 + dev[far])
    else:
        k = config.k
        lam = k * np.exp(u)
        alpha = -(u + k * s)
        alpha[far] = -dev[far]
    return lam, alpha


def lambda_alpha_of_beta(config: ProblemConfig, traj: Trajectory, beta):
    """(lambda, alpha) for center value(s) ``beta`` via dense evaluation of the orbit.

    Raises
    ------
    TrajectoryRangeError
        If s_beta lies below the integrated range; ``needed_s`` says how far
        the orbit must be extended.
    DomainError
        Power case with beta <= 0 or beta >= beta*.
    """
    if config.is_power and traj.minus_one_event is not None:
        b_star = float(beta_of_s(config, traj.minus_one_event))
        if np.any(np.asarray(beta) >= b_star):
            raise DomainError("center-value", f"beta >= beta* = {b_star!r}",
                              f"beta must be below beta* = {b_star!r}")
    lam, alpha = _lambda_alpha(config, traj, beta)
    if np.ndim(beta) == 0:
        return float(lam[0]), float(alpha[0])
    return lam, alpha


def beta_grid(config: ProblemConfig, traj: Trajectory | None = None, n: int = 4000,
              s_top: float | None = None, s_bottom: float | None = None) -> np.ndarray:
    """Increasing beta grid induced by a uniform grid in s.

    Defaults run from s_top = 20/k (lambda ~ e^-20 k) down to the end of the
    orbit, stopping just short of the w = -1 event when there is one.
    """
    if traj is None:
        traj = canonical_trajectory(config)
    if s_top is None:
        s_top = 20.0 / config.k
    if s_bottom is None:
        s_bottom = traj.s_lo
        if traj.minus_one_event is not None:
            s_bottom = traj.minus_one_event + 1e-8 * max(1.0, abs(traj.minus_one_event))
    s = np.linspace(s_top, s_bottom, n)
    return np.asarray(beta_of_s(config, s))


# -- beta* ---------------------------------------------------------------------

@dataclass(frozen=True)
class BetaStarCertificate:
    beta_star: float
    reason: str
    min_w_plus_one: float | None = None
    lower_bound: float | None = None
    event_s: float | None = None


def beta_star(config: ProblemConfig, traj: Trajectory | None = None,
              with_certificate: bool = False):
    """Supremum of center values with a positive solution on the unit ball.

    Finite (= e^{-theta t0}, t0 the w = -1 event) exactly when the orbit hits
    w = -1.  Otherwise ``math.inf`` is returned together with a certificate:

    * p > p_c: L is non-decreasing in s-forward direction, so for all s up to
      the start L <= L(s0) < 0, which forces w + 1 >= sqrt(2|L(s0)|/(theta(1-theta))).
    * p = p_c: L is conserved at 0 and the only point of {L = 0} with
      w = -1 is the equilibrium, which is not reached in finite time.

    Raises
    ------
    InconclusiveError
        p < p_c and the event was not reached inside the integrated window.
    """
    if traj is None:
        traj = canonical_trajectory(config)
    if not config.is_power:
        cert = BetaStarCertificate(math.inf, "exponential nonlinearity: every beta is admissible")
        return (math.inf, cert) if with_certificate else math.inf
    th = config.theta
    if traj.minus_one_event is not None:
        t0 = traj.minus_one_event
        val = math.exp(-th * t0)
        cert = BetaStarCertificate(val, "w = -1 event", event_s=t0)
        return (val, cert) if with_certificate else val
    p_c = critical_exponents(config.k).p_c
    y_min = float(np.min(traj.u))
    if config.p > p_c + 1e-12:
        L0 = float(lyapunov_value(config, traj.w[0], traj.dw[0]))
        if L0 >= 0:
            raise InconclusiveError("Lyapunov level at the start is not negative",
                                    recommended_s_min=traj.s_lo)
        bound = math.sqrt(2.0 * abs(L0) / (th * (1.0 - th)))
        cert = BetaStarCertificate(math.inf, "negative Lyapunov sublevel", y_min, bound)
    elif config.p >= p_c - 1e-12:
        cert = BetaStarCertificate(math.inf, "conserved zero Lyapunov level", y_min, 0.0)
    else:
        raise InconclusiveError(
            f"no w = -1 event down to s = {traj.s_lo}; extend the orbit",
            recommended_s_min=2.0 * traj.s_lo)
    return (math.inf, cert) if with_certificate else math.inf


def beta_star_by_shooting(config: ProblemConfig, bracket=None, xtol: float = 1e-12) -> float:
    """beta* as the root of beta -> v(1, beta) using the Picard solver only.

    Used as an independent cross-check of :func:`beta_star`.
    """
    if not config.is_power:
        return math.inf
    f = lambda b: picard_solve(config, b, r_stop=1.0).v[-1]
    if bracket is None:
        lo, hi = 0.5, 1.0
        while f(hi) > 0:
            lo, hi = hi, 2.0 * hi
            if hi > 1e8:
                return math.inf
    else:
        lo, hi = bracket
    return optimize.brentq(f, lo, hi, xtol=xtol, rtol=1e-15)


# -- tracing and classification -----------------------------------------------

@dataclass(eq=False)
class BifurcationCurve:
    """Sampled curve with turning points merged in (``is_turning`` marks them)."""

    config: ProblemConfig
    beta: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    is_turning: np.ndarray
    turning_points: list
    beta_star: float
    lambda_star: float
    beta_peak: float | None = None
    lambda_sup: float = math.nan  # empirical maximum, not a certified bound
    classification: BifurcationType | None = None
    evidence: dict = field(default_factory=dict)

    @property
    def points(self):
        return list(zip(self.beta.tolist(), self.lam.tolist(), self.alpha.tolist()))


def trace_curve(config: ProblemConfig, grid=None, traj: Trajectory | None = None,
                classify: bool = True) -> BifurcationCurve:
    """Evaluate the curve on an increasing beta grid and locate its turning points.

    Turning points are the zeros of w_hat' (already root-refined when the
    orbit is integrated) whose s lies inside the grid's s-window.
    """
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise DomainError("beta-grid", "grid must be strictly increasing with >= 2 points")
    if traj is None:
        traj = canonical_trajectory(config)
        if grid is not None and traj.termination != "minus_one_event":
            s_need = float(np.min(s_of_beta(config, grid[grid > 0] if config.is_power else grid)))
            if s_need < traj.s_lo:
                traj = canonical_trajectory(config, s_min=s_need - 1.0)
    if grid is None:
        grid = beta_grid(config, traj)
    b_star, _ = beta_star(config, traj, with_certificate=True) if config.is_power else (math.inf, None)
    if grid[-1] >= b_star:
        raise DomainError("beta-grid", f"beta = {grid[-1]!r} >= beta* = {b_star!r}")
    lam, alpha = _lambda_alpha(config, traj, grid)
    s_lo, s_hi = sorted(s_of_beta(config, grid[[0, -1]]))
    st = np.sort(traj.zeros_dw[(traj.zeros_dw >= s_lo) & (traj.zeros_dw <= s_hi)])
    bt = np.sort(np.asarray(beta_of_s(config, st)))
    lt, at = _lambda_alpha(config, traj, bt) if bt.size else (np.empty(0), np.empty(0))
    beta = np.concatenate([grid, bt])
    order = np.argsort(beta, kind="stable")
    is_turning = np.concatenate([np.zeros(grid.size, bool), np.ones(bt.size, bool)])[order]
    curve = BifurcationCurve(
        config=config, beta=beta[order], lam=np.concatenate([lam, lt])[order],
        alpha=np.concatenate([alpha, at])[order], is_turning=is_turning,
        turning_points=list(zip(bt.tolist(), lt.tolist())), beta_star=b_star,
        lambda_star=singular_solution(config).lambda_star)
    curve.lambda_sup = float(np.max(curve.lam))
    if bt.size == 1:
        curve.beta_peak = float(bt[0])
    if classify:
        curve.classification, curve.evidence = classify_type(config, curve)
    return curve


def predicted_type(config: ProblemConfig) -> BifurcationType:
    if not config.is_power:
        return BifurcationType.TYPEI if config.k > 0.25 else BifurcationType.TYPEII
    table = critical_exponents(config.k)
    if config.p <= table.p_c:
        return BifurcationType.TYPE0
    if config.p < table.p_jl_plus:
        return BifurcationType.TYPEI
    return BifurcationType.TYPEII


def is_boundary_case(config: ProblemConfig) -> bool:
    """k = 1/4, p = p_c or p = p_JL+, where the empirical verdict is advisory only."""
    if not config.is_power:
        return math.isclose(config.k, 0.25, rel_tol=0, abs_tol=1e-12)
    table = critical_exponents(config.k)
    return any(math.isclose(config.p, q, rel_tol=1e-12, abs_tol=1e-12)
               for q in (table.p_c, table.p_jl_plus) if math.isfinite(q))


def _lobes(values: np.ndarray):
    """Sign changes of ``values`` and the max |values| on each complete lobe between them."""
    sgn = np.sign(values)
    nz = np.nonzero(sgn)[0]
    sgn_nz = sgn[nz]
    change = np.nonzero(sgn_nz[1:] != sgn_nz[:-1])[0]
    idx = nz[change + 1]
    amps = [float(np.max(np.abs(values[a:b]))) for a, b in zip(idx[:-1], idx[1:])]
    return int(idx.size), amps


def classify_type(config: ProblemConfig, curve: BifurcationCurve):
    """Empirical Type 0 / I / II label, checked against the closed-form prediction.

    Returns
    -------
    (BifurcationType, dict)
        The label and the evidence it rests on.

    Raises
    ------
    ClassificationDiscrepancy
        The empirical label disagrees with the prediction (away from boundary cases).
    InconclusiveError
        No rule applies on the traced window.
    """
    lam_star = curve.lambda_star
    n_turn = int(np.count_nonzero(curve.is_turning))
    grid_lam = curve.lam[~curve.is_turning]
    n_sign, amps = _lobes(grid_lam - lam_star)
    lam_end = float(grid_lam[-1])
    decreasing = len(amps) >= 2 and all(b < a for a, b in zip(amps[:-1], amps[1:]))
    evidence = {
        "turning_points": n_turn,
        "sign_changes": n_sign,
        "lobe_amplitudes": amps,
        "lobes_decreasing": decreasing,
        "lambda_end": lam_end,
        "lambda_star": lam_star,
        "lambda_sup": curve.lambda_sup,
        "beta_star": curve.beta_star,
        "hardy_coefficient": hardy_coefficient(config),
    }
    empirical = None
    if (math.isfinite(curve.beta_star) and n_turn == 1
            and lam_end <= 1e-3 * curve.lambda_sup):
        empirical = BifurcationType.TYPE0
    elif n_sign >= MIN_OSCILLATIONS and decreasing:
        empirical = BifurcationType.TYPEI
    elif n_turn == 0 and abs(lam_end - lam_star) < CONVERGENCE_TOL:
        empirical = BifurcationType.TYPEII
    predicted = predicted_type(config)
    evidence["predicted"] = predicted.value
    evidence["empirical"] = empirical.value if empirical else None
    boundary = is_boundary_case(config)
    evidence["advisory"] = boundary
    if boundary:
        return predicted, evidence
    if empirical is None:
        raise InconclusiveError(f"no classification rule applies for {config.label}: {evidence}",
                                recommended_s_min=None)
    if empirical != predicted:
        raise ClassificationDiscrepancy(
            f"{config.label}: empirical {empirical.value} != predicted {predicted.value}")
    return empirical, evidence
