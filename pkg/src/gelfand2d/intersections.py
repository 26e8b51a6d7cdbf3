"""Ordering and intersection of the regular solution family, plus the Sturm identity.

Family members are shifts of the canonical orbit: w(t, beta) = w_hat(t - shift(beta)).
Since v = W + w (exponential) or v = W (1 + w) (power) with W > 0, the sign of
v(., gamma) - v(., beta) equals the sign of w(., gamma) - w(., beta) and the
sign of W - v equals the sign of -w.  Everything is therefore done in t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .bifurcation import beta_star, canonical_trajectory
from .errors import DomainError, InconclusiveError, NonSolutionError, TrajectoryRangeError
from .integrator import AMPLITUDE_FLOOR, Trajectory
from .model import ProblemConfig, critical_exponents, r_of_t, r_representable

DEFAULT_WINDOW = (-40.0, 5.0)
GRID_STEP = 0.01
# differences decay like e^{Re(mu) s}; far below this every feature is under the floor
ORBIT_FLOOR = -1000.0


def _orbit(config, traj, s_needed):
    """Canonical orbit reaching s_needed (extends the cached one on demand)."""
    if traj is None:
        traj = canonical_trajectory(config)
        if traj.s_lo > s_needed and traj.termination != "minus_one_event":
            if s_needed < ORBIT_FLOOR:
                raise TrajectoryRangeError(
                    f"window needs the orbit down to s = {s_needed!r} < {ORBIT_FLOOR}",
                    needed_s=s_needed)
            traj = canonical_trajectory(config, s_min=s_needed - 1.0)
    return traj


def family_value(config: ProblemConfig, traj: Trajectory | None, beta: float, t):
    """(w, w') of the member with center value ``beta`` at log-log coordinate t."""
    t = np.asarray(t, dtype=float)
    s = t - config.shift(beta)
    traj = _orbit(config, traj, float(np.min(s)))
    return traj(s)


def _check_pair(config, beta, gamma, window):
    if not beta < gamma:
        raise DomainError("ordering", f"beta = {beta!r} >= gamma = {gamma!r}")
    a, b = window
    if not a < b:
        raise DomainError("t-window", f"empty window [{a}, {b}]")


@dataclass(frozen=True)
class IntersectionResult:
    """Crossings of v(., gamma) and v(., beta), ordered by decreasing t (increasing r)."""

    count: int
    locations_t: np.ndarray
    locations_r: np.ndarray  # nan where r is not representable (r collapses to e)
    spacings: np.ndarray  # consecutive |dt|
    half_period: float  # asymptotic consecutive spacing (tail median)
    period: float  # asymptotic spacing between crossings two apart

    def __iter__(self):
        yield self.count
        yield self.locations_t


def _sign_changes(t, d, refine):
    """Refined zeros of d on the grid t, ignoring values below the amplitude floor."""
    sgn = np.where(np.abs(d) < AMPLITUDE_FLOOR, 0.0, np.sign(d))
    nz = np.nonzero(sgn)[0]
    roots = []
    for i, j in zip(nz[:-1], nz[1:]):
        if sgn[i] != sgn[j]:
            try:
                roots.append(optimize.brentq(refine, t[i], t[j], xtol=1e-12, rtol=4e-15))
            except ValueError:
                roots.append(0.5 * (t[i] + t[j]))
    return np.array(roots)


def intersection_count(config: ProblemConfig, beta: float, gamma: float,
                       t_window=DEFAULT_WINDOW, traj: Trajectory | None = None,
                       step: float = GRID_STEP) -> IntersectionResult:
    """Count sign changes of w(., gamma) - w(., beta) on ``t_window``.

    Crossings are bracketed on a uniform t grid, refined with Brent's method
    on the dense orbit, and those whose neighbouring values are all below
    the 1e-12 floor are ignored.
    """
    _check_pair(config, beta, gamma, t_window)
    a, b = map(float, t_window)
    sb, sg = config.shift(beta), config.shift(gamma)
    traj = _orbit(config, traj, a - max(sb, sg))
    diff = lambda t: traj.state(t - sg)[0] - traj.state(t - sb)[0]
    n = max(2, int(math.ceil((b - a) / step)) + 1)
    t = np.linspace(a, b, n)
    roots = _sign_changes(t, diff(t), lambda x: float(diff(x)))
    roots = np.sort(roots)[::-1]
    r = np.full(roots.shape, np.nan)
    ok = r_representable(roots) & (roots > -30.0)
    r[ok] = r_of_t(roots[ok])
    spacings = -np.diff(roots)
    tail = spacings[-4:]
    half = float(np.median(tail)) if tail.size else math.nan
    period_all = roots[:-2] - roots[2:]
    period = float(np.median(period_all[-3:])) if period_all.size else math.nan
    return IntersectionResult(int(roots.size), roots, r, spacings, half, period)


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    margin_order: float  # min of w(., gamma) - w(., beta)
    margin_singular: float  # min of -w(., gamma), i.e. of W - v(., gamma) in sign
    first_crossing: float | None  # largest t with a sign change, if any

    def __bool__(self):
        return self.separated


def separation_check(config: ProblemConfig, beta: float, gamma: float,
                     t_window=DEFAULT_WINDOW, traj: Trajectory | None = None,
                     step: float = GRID_STEP) -> SeparationResult:
    """Test v(., beta) < v(., gamma) < W on the window via the transformed variables."""
    _check_pair(config, beta, gamma, t_window)
    a, b = map(float, t_window)
    sb, sg = config.shift(beta), config.shift(gamma)
    traj = _orbit(config, traj, a - max(sb, sg))
    n = max(2, int(math.ceil((b - a) / step)) + 1)
    t = np.linspace(a, b, n)
    wg = traj.state(t - sg)[0] - traj.offset
    wb = traj.state(t - sb)[0] - traj.offset
    m1 = float(np.min(wg - wb))
    m2 = float(np.min(-wg))
    first = None
    if m1 <= 0:
        res = intersection_count(config, beta, gamma, (a, b), traj, step)
        first = float(res.locations_t[0]) if res.count else float(t[np.argmin(wg - wb)])
    return SeparationResult(m1 > 0 and m2 > 0, m1, m2, first)


@dataclass(frozen=True)
class ZeroResult:
    has_zero: bool
    t_event: float | None
    r0: float | None  # None when not representable

    def __bool__(self):
        return self.has_zero


def zero_before_e(config: ProblemConfig, beta: float, traj: Trajectory | None = None) -> ZeroResult:
    """Whether v(., beta) vanishes at some r < e (power nonlinearity).

    The w = -1 event of the canonical orbit at s = t0 moves to t = t0 + shift(beta).
    """
    if not config.is_power:
        raise DomainError("nonlinearity", "zero_before_e requires the power nonlinearity")
    if not beta > 0:
        raise DomainError("center-value", f"beta = {beta!r} <= 0")
    if traj is None:
        traj = canonical_trajectory(config)
    if traj.minus_one_event is not None:
        t_ev = traj.minus_one_event + config.shift(beta)
        r0 = float(r_of_t(t_ev)) if bool(r_representable(t_ev)) else None
        return ZeroResult(True, t_ev, r0)
    if config.p >= critical_exponents(config.k).p_c - 1e-12:
        beta_star(config, traj)  # raises if the no-event verdict is not certified
        return ZeroResult(False, None, None)
    raise InconclusiveError("orbit too short to locate w = -1", recommended_s_min=2 * traj.s_lo)


# -- Sturm comparison ---------------------------------------------------------

def _d1(x, h):
    """Fourth-order central first derivative on a uniform grid (interior points)."""
    return (x[:-4] - 8.0 * x[1:-3] + 8.0 * x[3:-1] - x[4:]) / (12.0 * h)


@dataclass(eq=False)
class SturmPair:
    """Samples of y'' + q y' + a y = 0 and z'' + q z' + b z = 0 on a uniform t grid."""

    q: float
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    z: np.ndarray
    dz: np.ndarray

    def __post_init__(self):
        for name in ("t", "a", "b", "y", "dy", "z", "dz"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.t.size < 5:
            raise DomainError("samples", "at least 5 samples are required")
        h = np.diff(self.t)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise DomainError("samples", "t grid must be uniform")

    @property
    def h(self):
        return float(self.t[1] - self.t[0])

    def residuals(self):
        """Max relative ODE residual of y and z (second derivative by finite differences)."""
        out = []
        for u, du, c in ((self.y, self.dy, self.a), (self.z, self.dz, self.b)):
            ddu = _d1(du, self.h)
            res = ddu + self.q * du[2:-2] + c[2:-2] * u[2:-2]
            scale = np.abs(ddu) + np.abs(self.q * du[2:-2]) + np.abs(c[2:-2] * u[2:-2])
            out.append(float(np.max(np.abs(res)) / max(float(np.max(scale)), 1e-300)))
        return tuple(out)


def sturm_wronskian_defect(pair: SturmPair, t_window=None, residual_tol: float = 1e-6) -> float:
    """max | d/dt [e^{qt}(z'y - y'z)] - e^{qt} y z (a - b) | over the window.

    The left side is differentiated numerically (fourth order).  Inputs whose
    samples do not satisfy their ODEs to ``residual_tol`` are rejected.
    """
    ry, rz = pair.residuals()
    if ry > residual_tol or rz > residual_tol:
        raise NonSolutionError(f"samples are not solutions: residuals y {ry:.3g}, z {rz:.3g}")
    t = pair.t
    bracket = np.exp(pair.q * t) * (pair.dz * pair.y - pair.dy * pair.z)
    lhs = _d1(bracket, pair.h)
    tc = t[2:-2]
    rhs = np.exp(pair.q * tc) * pair.y[2:-2] * pair.z[2:-2] * (pair.a[2:-2] - pair.b[2:-2])
    mask = np.ones(tc.shape, bool)
    if t_window is not None:
        mask = (tc >= t_window[0]) & (tc <= t_window[1])
    return float(np.max(np.abs(lhs - rhs)[mask]))


def linearized_pair(config: ProblemConfig, beta: float, gamma: float, t_window,
                    n: int = 4001, traj: Trajectory | None = None) -> SturmPair:
    """Comparison pair for the exponential case.

    y = w(., gamma) - w(., beta) solves y'' - y' + k g(t) y = 0 with
    g = (e^{w_gamma} - e^{w_beta}) / (w_gamma - w_beta); z solves the
    linearisation z'' - z' + k z = 0 (z = e^{t/2} cos(omega t) when k > 1/4,
    otherwise e^{mu t} with mu the smaller characteristic root).
    """
    if config.is_power:
        raise DomainError("nonlinearity", "linearized_pair is implemented for the exponential case")
    k = config.k
    t = np.linspace(t_window[0], t_window[1], n)
    wg, dwg = family_value(config, traj, gamma, t)
    wb, dwb = family_value(config, traj, beta, t)
    d = wg - wb
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(d) < 1e-300, 1.0, np.expm1(d) / d)
    g = np.exp(wb) * ratio
    if k > 0.25:
        om = 0.5 * math.sqrt(4.0 * k - 1.0)
        z = np.exp(t / 2.0) * np.cos(om * t)
        dz = np.exp(t / 2.0) * (0.5 * np.cos(om * t) - om * np.sin(om * t))
    else:
        mu = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * k))
        z = np.exp(mu * t)
        dz = mu * z
    return SturmPair(-1.0, t, k * g, np.full_like(t, k), d, dwg - dwb, z, dz)
