"""Regular radial solutions in the r-picture and orbits of the autonomous systems.

Two independent solvers live here.

* :func:`picard_solve` iterates the integral equation for v near the center,
  where it is a contraction, and continues outward with classical RK4.
  It works in z = rho^(-k) = e^(-kt), which turns the borderline singular
  weight into a smooth kernel:

      v(z) = beta - k^-2 int_0^z G(zeta) dzeta,
      G(zeta) = int_0^1 u^(1/k) f(v(zeta u)) du.

* :func:`integrate_autonomous` integrates the Emden-Fowler equations

      w'' - w' + k(e^w - 1) = 0                                   (exponential)
      w'' + (2 theta - 1) w' + theta(1-theta)(|w+1|^p - (w+1)) = 0  (power)

  backward in s from a point supplied by the large-s expansion
  (:func:`asymptotic_init`).  The power system is carried internally in
  y = w + 1 so that w = -1 is the plain zero y = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline
from scipy.special import roots_jacobi

from .errors import (DomainError, EventRefinementError, NumericalError, PicardConvergenceError,
                     StepSizeError, TrajectoryRangeError)
from .model import ProblemConfig, apriori_constant, r_of_t, singular_solution, t_of_r

AMPLITUDE_FLOOR = 1e-12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


# -- radial solutions --------------------------------------------------------

@dataclass(frozen=True)
class AprioriBound:
    """Pointwise upper bound for regular solutions.

    ``v <= k*t + C1`` in the exponential case and ``v <= C1*exp(theta*t)``
    in the power case, t = log(-log(r/e)).
    """

    C1: float
    k: float
    theta: float | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.theta is None:
            return self.k * t + self.C1
        return self.C1 * np.exp(self.theta * t)


def apriori_bound(config: ProblemConfig) -> AprioriBound:
    return AprioriBound(apriori_constant(config), config.k, config.theta)


@dataclass(frozen=True)
class _ChebyshevHead:
    """v on t >= t0 stored as Chebyshev series in z = e^(-kt) on [0, z0]."""

    k: float
    z0: float
    coef_v: np.ndarray
    coef_G: np.ndarray
    f: Callable

    @property
    def t0(self):
        return -math.log(self.z0) / self.k

    def _x(self, t):
        z = np.exp(-self.k * np.asarray(t, dtype=float))
        return z, 2.0 * z / self.z0 - 1.0

    def v(self, t):
        _, x = self._x(t)
        return cheb.chebval(x, self.coef_v)

    def dv_dt(self, t):
        z, x = self._x(t)
        return z * cheb.chebval(x, self.coef_G) / self.k

    def flux_integral(self, t):
        """int_t^inf f(v) e^{-(1+k)t'} dt' by adaptive quadrature on the stored series."""
        k = self.k
        out = []
        for ti in np.atleast_1d(t):
            z = math.exp(-k * ti)
            g = lambda zeta: float(self.f(cheb.chebval(2.0 * zeta / self.z0 - 1.0, self.coef_v)))
            val, _ = integrate.quad(g, 0.0, z, weight="alg", wvar=(1.0 / k, 0.0),
                                    epsabs=0.0, epsrel=1e-13)
            out.append(val / k)
        return np.array(out)


@dataclass(eq=False)
class RadialSolution:
    """Sampled regular solution of the radial v-equation.

    Samples are stored in the log-log coordinate ``t`` in decreasing order,
    i.e. increasing radius; ``r`` is derived and reads 0 where it underflows.
    The center value ``beta`` = v(0) corresponds to t = +inf and is kept
    separately.
    """

    config: ProblemConfig
    beta: float
    t: np.ndarray
    v: np.ndarray
    dv_dt: np.ndarray
    method: str
    tolerances: dict
    apriori: AprioriBound
    zero_crossing: float | None = None  # t where v changes sign (power)
    tail_flux: float | None = None  # int_{t.max()}^inf f(v) e^{-(1+k)t} dt, if known
    head: _ChebyshevHead | None = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.dv_dt = np.asarray(self.dv_dt, dtype=float)
        if self.t.size > 1 and np.any(np.diff(self.t) >= 0):
            raise ValueError("samples must be ordered by decreasing t")
        self._spline = None

    @property
    def r(self):
        return np.asarray(r_of_t(self.t))

    @property
    def dv_dr(self):
        """dv/dr = -v_t / (r rho); infinite where r underflows."""
        with np.errstate(divide="ignore", over="ignore"):
            return -self.dv_dt / (self.r * np.exp(self.t))

    @property
    def t_range(self):
        hi = math.inf if self.head is not None else float(self.t[0])
        return float(self.t[-1]), hi

    def evaluate(self, t):
        """(v, v_t) at arbitrary t inside the sampled range (dense interpolation)."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_range
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise DomainError("t-range", f"t outside [{lo}, {hi}]",
                              f"requested t outside the solution range [{lo}, {hi}]")
        v = np.empty_like(t)
        dv = np.empty_like(t)
        in_head = np.zeros(t.shape, dtype=bool)
        if self.head is not None:
            in_head = t >= self.head.t0
            v[in_head] = self.head.v(t[in_head])
            dv[in_head] = self.head.dv_dt(t[in_head])
        rest = ~in_head
        if np.any(rest):
            if self._spline is None:
                self._spline = CubicHermiteSpline(self.t[::-1], self.v[::-1], self.dv_dt[::-1])
            tr = np.clip(t[rest], self.t[-1], self.t[0])
            v[rest] = self._spline(tr)
            dv[rest] = self._spline(tr, 1)
        return v, dv

    def value_at_r(self, r):
        return self.evaluate(t_of_r(r))[0]

    def apriori_violation(self) -> float:
        """max(v - bound) over samples; non-positive when the a priori bound holds."""
        return float(np.max(self.v - self.apriori(self.t)))


def _default_z0(config: ProblemConfig, beta: float) -> float:
    # Lipschitz constant of the integral map is L z / (k(1+k)) -> contraction 1/2
    return config.k * (1.0 + config.k) / (2.0 * config.fprime_bound(beta))


def _picard_head(config, beta, z0, n_nodes, n_quad, tol, max_iter):
    k = config.k
    x = np.cos(np.pi * np.arange(n_nodes + 1) / n_nodes)
    xq, wq = roots_jacobi(n_quad, 0.0, 1.0 / k)
    uq = (xq + 1.0) / 2.0
    wq = wq / 2.0 ** (1.0 + 1.0 / k)
    u = (x + 1.0) / 2.0
    xx = 2.0 * np.outer(u, uq) - 1.0

    def kernel(v):
        coef = cheb.chebfit(x, config.f(v), n_nodes)
        return cheb.chebval(xx, coef) @ wq

    scale = max(1.0, abs(beta))
    threshold = max(1e-3 * tol, 4e-16) * scale
    v = np.full(x.shape, float(beta))
    d_prev = None
    q = None
    for _ in range(max_iter):
        G = kernel(v)
        integral = cheb.chebint(cheb.chebfit(x, G, n_nodes), lbnd=-1) * (z0 / 2.0)
        v_new = beta - cheb.chebval(x, integral) / k ** 2
        d = float(np.max(np.abs(v_new - v)))
        v = v_new
        if d_prev is not None and d_prev > 0:
            q = d / d_prev
        if d <= threshold:
            break
        d_prev = d
    else:
        raise PicardConvergenceError(
            f"Picard iteration did not reach {threshold:.3g} in {max_iter} iterations "
            f"(last update {d:.3g}, contraction estimate {q})", contraction=q)
    G = kernel(v)
    head = _ChebyshevHead(k, z0, cheb.chebfit(x, v, n_nodes), cheb.chebfit(x, G, n_nodes), config.f)
    return x, v, G, head, q


def _rk4(config, t0, v0, dv0, t_stop, h):
    """Classical RK4 for v_tt = v_t - e^{-kt} f(v), from t0 down to t_stop."""
    k = config.k
    if config.is_power:
        p = config.p
        f = lambda v: abs(v) ** p
    else:
        f = math.exp
    n = max(1, int(math.ceil((t0 - t_stop) / h)))
    hh = (t_stop - t0) / n
    ts = np.empty(n + 1)
    vs = np.empty(n + 1)
    ds = np.empty(n + 1)
    t, v, d = t0, v0, dv0
    ts[0], vs[0], ds[0] = t, v, d
    half = 0.5 * hh
    for i in range(1, n + 1):
        e0 = math.exp(-k * t)
        em = math.exp(-k * (t + half))
        e1 = math.exp(-k * (t + hh))
        k1v, k1d = d, d - e0 * f(v)
        k2v = d + half * k1d
        k2d = k2v - em * f(v + half * k1v)
        k3v = d + half * k2d
        k3d = k3v - em * f(v + half * k2v)
        k4v = d + hh * k3d
        k4d = k4v - e1 * f(v + hh * k3v)
        v += hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        d += hh / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        t = t0 + i * hh
        ts[i], vs[i], ds[i] = t, v, d
    return ts, vs, ds


def picard_solve(config: ProblemConfig, beta: float, r_stop: float = 1.0, tol: float = 1e-10,
                 t_stop: float | None = None, h: float = 2e-3, n_nodes: int = 40,
                 n_quad: int = 48, max_iter: int = 200) -> RadialSolution:
    """Regular solution with v(0) = beta by Picard iteration plus RK4 continuation.

    Parameters
    ----------
    config : ProblemConfig
    beta : float
        Center value; must be positive in the power case.
    r_stop : float
        Outer radius in (0, e).  Ignored when ``t_stop`` is given.
    tol : float
        Target accuracy of the fixed-point iteration.
    t_stop : float, optional
        Outer end in the log-log coordinate, for radii too close to e to be
        represented.
    h : float
        RK4 step in t.

    Returns
    -------
    RadialSolution
        Samples on Chebyshev nodes in z for t >= t0 followed by the RK4 grid.
        In the power case a sign change of v is recorded in ``zero_crossing``;
        integration continues past it with |v|^p.
    """
    if not tol > 0:
        raise DomainError("tolerance", f"tol = {tol!r} <= 0")
    beta = float(beta)
    if config.is_power and not beta > 0:
        raise DomainError("center-value", f"beta = {beta!r} <= 0",
                          f"power case requires beta > 0, got {beta!r}")
    if t_stop is None:
        t_stop = float(t_of_r(r_stop))
    k = config.k
    z0 = min(_default_z0(config, beta), math.exp(-k * t_stop))
    x, v_head, G, head, q = _picard_head(config, beta, z0, n_nodes, n_quad, tol, max_iter)
    z = z0 * (x + 1.0) / 2.0
    keep = z > 0
    t_head = -np.log(z[keep]) / k
    dv_head = z[keep] * G[keep] / k
    t0 = head.t0
    order = np.argsort(-t_head)
    t_head, v_head, dv_head = t_head[order], v_head[keep][order], dv_head[order]
    if t0 - t_stop > 1e-14:
        ts, vs, ds = _rk4(config, t0, float(v_head[-1]), float(dv_head[-1]), t_stop, h)
        t_all = np.concatenate([t_head[:-1], ts])
        v_all = np.concatenate([v_head[:-1], vs])
        d_all = np.concatenate([dv_head[:-1], ds])
    else:
        t_all, v_all, d_all = t_head, v_head, dv_head

    sol = RadialSolution(config, beta, t_all, v_all, d_all, method="picard+rk4",
                         tolerances={"picard_tol": tol, "rk4_h": h, "contraction": q,
                                     "z0": z0, "t0": t0},
                         apriori=apriori_bound(config), head=head)
    if config.is_power:
        sol.zero_crossing = _first_sign_change(sol)
    return sol


def _first_sign_change(sol: RadialSolution):
    sign = np.sign(sol.v)
    idx = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if idx.size == 0:
        return None
    i = int(idx[0])
    a, b = sol.t[i + 1], sol.t[i]
    try:
        return optimize.brentq(lambda t: float(sol.evaluate(t)[0]), a, b, xtol=1e-14)
    except ValueError as exc:
        raise EventRefinementError(f"zero of v not bracketed on [{a}, {b}]") from exc


def flux_identity_defect(config: ProblemConfig, solution: RadialSolution) -> float:
    """max over samples of | -r v'(r) - int_0^r s V_k(s) f(v(s)) ds |.

    In t the left side is e^{-t} v_t and the integral is
    int_t^inf f(v) e^{-(1+k)t'} dt'.  The head region uses adaptive
    quadrature on the stored Chebyshev series; the sampled region uses
    8-point Gauss-Legendre on each cubic-Hermite interval.  Without a head,
    the part beyond the largest sample is ``solution.tail_flux`` or, failing
    that, the frozen-value estimate f(v_last) e^{-(1+k) t_max} / (1+k).
    """
    k = config.k
    t, v, dv = solution.t, solution.v, solution.dv_dt
    lhs = np.exp(-t) * dv
    rhs = np.empty_like(t)
    head = solution.head
    if head is not None:
        in_head = t >= head.t0
        rhs[in_head] = head.flux_integral(t[in_head])
        start = int(np.count_nonzero(in_head)) - 1
        base = float(rhs[start])
    else:
        start = 0
        if solution.tail_flux is not None:
            base = float(solution.tail_flux)
        else:
            base = float(config.f(v[0])) * math.exp(-(1.0 + k) * t[0]) / (1.0 + k)
        rhs[0] = base
    if start < t.size - 1:
        ts, vs, ds = t[start:], v[start:], dv[start:]
        a, b = ts[1:], ts[:-1]
        hseg = b - a
        nodes = 0.5 * (_GL_NODES[None, :] + 1.0)  # in [0, 1]
        # cubic Hermite on each segment, parameter from a (index i+1) to b (index i)
        va, vb = vs[1:, None], vs[:-1, None]
        da, db = ds[1:, None] * hseg[:, None], ds[:-1, None] * hseg[:, None]
        s = nodes
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        vq = h00 * va + h10 * da + h01 * vb + h11 * db
        tq = a[:, None] + s * hseg[:, None]
        integrand = config.f(vq) * np.exp(-(1.0 + k) * tq)
        seg = 0.5 * hseg * (integrand @ _GL_WEIGHTS)
        rhs[start + 1:] = base + np.cumsum(seg)
    return float(np.max(np.abs(lhs - rhs)))


# -- asymptotic expansion -------------------------------------------------------

def asymptotic_coefficients(config: ProblemConfig, order: int) -> np.ndarray:
    """Coefficients of the large-s expansion in powers of x = e^{-ks}.

    Exponential: w = -ks + sum_{n>=1} a_n x^n with n(kn+1) a_n = -[e^phi]_{n-1}.
    Power: w + 1 = A^{-1} e^{-theta s} psi(x), psi = sum b_n x^n, b_0 = 1,
    kn(kn+1) b_n = -[psi^p]_{n-1}.  Index 0 holds 0 (exponential) or 1 (power).
    """
    k = config.k
    a = np.zeros(order + 1)
    g = np.zeros(order + 1)
    g[0] = 1.0
    if config.is_power:
        p = config.p
        a[0] = 1.0
        for n in range(1, order + 1):
            a[n] = -g[n - 1] / (k * n * (k * n + 1.0))
            j = np.arange(1, n + 1)
            g[n] = np.sum(((p + 1.0) * j - n) * a[j] * g[n - j]) / n
    else:
        for n in range(1, order + 1):
            a[n] = -g[n - 1] / (n * (k * n + 1.0))
            j = np.arange(1, n + 1)
            g[n] = np.sum(j * a[j] * g[n - j]) / n
    return a


def truncation_estimate(config: ProblemConfig, s0: float, order: int) -> float:
    """Size of the first dropped term (relative to w+1 in the power case)."""
    c = asymptotic_coefficients(config, order + 1)
    return abs(c[order + 1]) * math.exp(-config.k * s0 * (order + 1))


def default_s0(config: ProblemConfig, order: int = 8, tol: float = 1e-15) -> float:
    """Smallest s0 at which the first dropped term is below ``tol``."""
    c = abs(asymptotic_coefficients(config, order + 1)[order + 1])
    x = (tol / c) ** (1.0 / (order + 1))
    return max(-math.log(x) / config.k, 1.0)


def _amplitude(config):
    th = config.theta
    return (th * (1.0 - th)) ** (th / config.k)


def asymptotic_state(config: ProblemConfig, s, order: int = 8):
    """Internal state (u, u') of the canonical orbit for large s.

    u = w for the exponential case and u = w + 1 for the power case.
    """
    s = np.asarray(s, dtype=float)
    k = config.k
    c = asymptotic_coefficients(config, order)
    x = np.exp(-k * s)
    n = np.arange(order + 1)
    powers = x[..., None] ** n
    series = powers @ c
    dseries = powers @ (n * c)
    if config.is_power:
        th = config.theta
        pre = np.exp(-th * s) / _amplitude(config)
        return pre * series, pre * (-th * series - k * dseries)
    return -k * s + series, -k - k * dseries


def asymptotic_deviation(config: ProblemConfig, s, order: int = 8):
    """w + ks (exponential) or (w+1) A e^{theta s} - 1 (power) from the series.

    These are the small quantities that the bifurcation map needs without
    cancellation when s is large.
    """
    s = np.asarray(s, dtype=float)
    c = asymptotic_coefficients(config, order)
    x = np.exp(-config.k * s)
    n = np.arange(1, order + 1)
    return (x[..., None] ** n) @ c[1:]


def asymptotic_init(config: ProblemConfig, s0: float, order: int = 1,
                    tol: float = 1e-12) -> tuple[float, float]:
    """(w(s0), w'(s0)) of the canonical orbit from its large-s expansion.

    With the default ``order=1``:

    * exponential: w = -k s0 - e^{-k s0}/(1+k), w' = -k + k e^{-k s0}/(1+k);
    * power: w = A^{-1} e^{-theta s0} (1 - e^{-k s0}/(k(1+k))) - 1 with
      A = (theta(1-theta))^{theta/k}.

    Raises
    ------
    DomainError
        If the first dropped term exceeds ``tol``.
    """
    est = truncation_estimate(config, s0, order)
    if est > tol:
        raise DomainError("asymptotic-start",
                          f"truncation {est:.3g} > tol {tol:.3g} at s0 = {s0!r}",
                          f"s0 = {s0!r} too small: dropped term {est:.3g} exceeds {tol:.3g}")
    u, du = asymptotic_state(config, s0, order)
    u, du = float(u), float(du)
    return (u - 1.0, du) if config.is_power else (u, du)


# -- Lyapunov functions ------------------------------------------------------

def lyapunov_value(config: ProblemConfig, w, dw):
    """L(w, w').

    Exponential: w'^2/2 + k(e^w - w), non-decreasing in t.
    Power: w'^2/2 + theta(1-theta)(|y|^p y/(p+1) - y^2/2), y = w + 1;
    its t-derivative is (1 - 2 theta) w'^2.
    """
    w = np.asarray(w, dtype=float)
    dw = np.asarray(dw, dtype=float)
    if config.is_power:
        th, p = config.theta, config.p
        y = w + 1.0
        out = 0.5 * dw ** 2 + th * (1.0 - th) * (np.abs(y) ** p * y / (p + 1.0) - 0.5 * y ** 2)
    else:
        out = 0.5 * dw ** 2 + config.k * (np.exp(w) - w)
    return float(out) if out.ndim == 0 else out


def lyapunov_scale(config: ProblemConfig, w, dw):
    """Sum of magnitudes of the terms of L; the natural size for relative checks."""
    w = np.asarray(w, dtype=float)
    dw = np.asarray(dw, dtype=float)
    if config.is_power:
        th, p = config.theta, config.p
        y = np.abs(w + 1.0)
        return 0.5 * dw ** 2 + th * (1.0 - th) * (y ** (p + 1.0) / (p + 1.0) + 0.5 * y ** 2)
    return 0.5 * dw ** 2 + config.k * (np.exp(w) + np.abs(w))


# -- orbits -------------------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    """Sampled orbit of the autonomous system with dense evaluation.

    Samples are stored in integration order (decreasing ``s``).  Internally
    the state is ``u`` = w (exponential) or w + 1 (power); ``w`` and ``dw``
    expose the documented variable.  Queries with s above the last sample
    are answered by ``extension`` (the asymptotic series) when present.
    """

    config: ProblemConfig
    coordinate: str
    s: np.ndarray
    u: np.ndarray
    du: np.ndarray
    dense: Callable = field(repr=False)
    zeros_w: np.ndarray = field(default_factory=lambda: np.empty(0))
    zeros_dw: np.ndarray = field(default_factory=lambda: np.empty(0))
    minus_one_event: float | None = None
    termination: str = "s_min"
    rtol: float | None = None
    atol: float | None = None
    extension: Callable | None = field(default=None, repr=False)
    s_hi: float | None = None

    def __post_init__(self):
        if self.s_hi is None:
            self.s_hi = float(np.max(self.s))

    @property
    def offset(self) -> float:
        return 1.0 if self.config.is_power else 0.0

    @property
    def w(self):
        return self.u - self.offset

    @property
    def dw(self):
        return self.du

    @property
    def lyapunov(self):
        return lyapunov_value(self.config, self.w, self.dw)

    @property
    def s_lo(self) -> float:
        return float(np.min(self.s))

    @property
    def s_range(self):
        return self.s_lo, (math.inf if self.extension is not None else self.s_hi)

    def state(self, s):
        """Internal (u, u') at s."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        lo = self.s_lo
        if np.any(s < lo - 1e-9):
            need = float(np.min(s))
            raise TrajectoryRangeError(f"s = {need} below trajectory range [{lo}, ...)", needed_s=need)
        u = np.empty_like(s)
        du = np.empty_like(s)
        upper = s > self.s_hi
        if np.any(upper):
            if self.extension is None:
                raise TrajectoryRangeError(f"s = {float(np.max(s))} above trajectory range",
                                           needed_s=float(np.max(s)))
            u[upper], du[upper] = self.extension(s[upper])
        inner = ~upper
        if np.any(inner):
            vals = np.asarray(self.dense(np.clip(s[inner], lo, self.s_hi)))
            u[inner], du[inner] = vals[0], vals[1]
        if scalar:
            return float(u[0]), float(du[0])
        return u, du

    def __call__(self, s):
        """(w, w') at s."""
        u, du = self.state(s)
        return u - self.offset, du


def _rhs(config: ProblemConfig):
    k = config.k
    if config.is_power:
        th, p = config.theta, config.p
        damp, lin = 1.0 - 2.0 * th, th * (1.0 - th)
        return lambda s, y: [y[1], damp * y[1] - lin * (abs(y[0]) ** p - y[0])]
    return lambda s, y: [y[1], y[1] - k * (math.exp(y[0]) - 1.0)]


def integrate_autonomous(config: ProblemConfig, init, s_min: float, rtol: float = 1e-10,
                         atol: float | None = None, events: bool = True,
                         extension: Callable | None = None,
                         max_step: float = np.inf) -> Trajectory:
    """Integrate the Emden-Fowler system backward from ``init = (s0, w, w')`` to ``s_min``.

    Uses the DOP853 pair with dense output.  The step error estimate does not
    control the dense interpolant; capping ``max_step`` keeps the interpolant
    as accurate as the steps on slowly varying orbits.  Crossings of w = 0 and w' = 0 are
    recorded (root-refined by the solver's event machinery); in the power case
    w = -1 is terminal.  Features whose amplitude is below 1e-12 are dropped.

    Raises
    ------
    StepSizeError
        If the solver cannot proceed.
    """
    s0, w0, dw0 = (float(x) for x in init)
    if not s_min < s0:
        raise DomainError("s-range", f"s_min = {s_min!r} >= s0 = {s0!r}")
    if not rtol > 0:
        raise DomainError("tolerance", f"rtol = {rtol!r} <= 0")
    offset = 1.0 if config.is_power else 0.0
    u0 = w0 + offset
    if atol is None:
        atol = rtol * min(1.0, abs(u0)) if config.is_power and u0 != 0 else rtol
    ev = []
    if events:
        zero = lambda s, y: y[0] - offset
        crit = lambda s, y: y[1]
        ev = [zero, crit]
        if config.is_power:
            hit = lambda s, y: y[0]
            hit.terminal = True
            hit.direction = 0
            ev.append(hit)
    sol = integrate.solve_ivp(_rhs(config), (s0, s_min), [u0, dw0], method="DOP853", rtol=rtol,
                              atol=atol, dense_output=True, events=ev or None,
                              max_step=max_step)
    if sol.status == -1:
        raise StepSizeError(f"integration failed at s = {sol.t[-1]!r}: {sol.message}")
    zeros_w = zeros_dw = np.empty(0)
    minus_one = None
    termination = "s_min"
    if events:
        te, ye = sol.t_events, sol.y_events
        keep = np.abs(ye[0][:, 1]) >= AMPLITUDE_FLOOR if len(te[0]) else np.zeros(0, bool)
        zeros_w = np.asarray(te[0])[keep]
        keep = np.abs(ye[1][:, 0] - offset) >= AMPLITUDE_FLOOR if len(te[1]) else np.zeros(0, bool)
        zeros_dw = np.asarray(te[1])[keep]
        if config.is_power and len(te[2]):
            minus_one = float(te[2][0])
            termination = "minus_one_event"
    return Trajectory(config, "s", sol.t, sol.y[0], sol.y[1], dense=sol.sol, zeros_w=zeros_w,
                      zeros_dw=zeros_dw, minus_one_event=minus_one, termination=termination,
                      rtol=rtol, atol=atol, extension=extension)


def trajectory_residual(traj: Trajectory, n: int = 100, width: float = 0.5, seed: int = 0) -> float:
    """Re-substitute the dense output into the ODE on ``n`` random windows.

    On each window [a, b] both u(b) - u(a) - int u' and u'(b) - u'(a) - int F(u, u')
    are evaluated with Gauss-Legendre quadrature (split at solver steps), and
    the larger is reported relative to max(1, |u|, |u'|) on the window.
    """
    rhs = _rhs(traj.config)
    rng = np.random.default_rng(seed)
    lo, hi = traj.s_lo, traj.s_hi
    width = min(width, hi - lo)
    steps = np.sort(traj.s)
    worst = 0.0
    for a in rng.uniform(lo, hi - width, size=n):
        b = a + width
        cuts = np.concatenate([[a], steps[(steps > a) & (steps < b)], [b]])
        int_u = int_f = 0.0
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            sq = c0 + (c1 - c0) * 0.5 * (_GL_NODES + 1.0)
            u, du = traj.state(sq)
            f = np.array([rhs(0.0, (ui, di))[1] for ui, di in zip(u, du)])
            int_u += 0.5 * (c1 - c0) * (du @ _GL_WEIGHTS)
            int_f += 0.5 * (c1 - c0) * (f @ _GL_WEIGHTS)
        (ua, dua), (ub, dub) = traj.state(a), traj.state(b)
        u_s, du_s = traj.state(np.linspace(a, b, 9))
        scale = max(1.0, float(np.max(np.abs(u_s))), float(np.max(np.abs(du_s))))
        worst = max(worst, abs(ub - ua - int_u) / scale, abs(dub - dua - int_f) / scale)
    return worst


# -- coordinate changes ---------------------------------------------------------

def _singular_values(config, t):
    info = singular_solution(config)
    return np.asarray(info.W_of_t(t)), np.asarray(info.dW_dt(t))


def _to_w(config, t, v, dv):
    W, dW = _singular_values(config, t)
    if config.is_power:
        return v / W - 1.0, (dv * W - v * dW) / W ** 2
    return v - W, dv - dW


def transform_r_to_t(config: ProblemConfig, solution: RadialSolution) -> Trajectory:
    """Map a radial solution to w(t) = v - W (exponential) or v/W - 1 (power)."""
    w, dw = _to_w(config, solution.t, solution.v, solution.dv_dt)
    offset = 1.0 if config.is_power else 0.0

    def dense(t):
        v, dv = solution.evaluate(t)
        ww, dd = _to_w(config, np.asarray(t), v, dv)
        return np.vstack([ww + offset, dd])

    ext = None
    s_hi = float(solution.t[0])
    if solution.head is not None:
        ext = lambda t: tuple(dense(t))
    traj = Trajectory(config, "t", solution.t.copy(), w + offset, dw, dense=dense,
                      termination="radial", extension=ext, s_hi=s_hi)
    return traj


def transform_t_to_r(config: ProblemConfig, trajectory: Trajectory, beta: float) -> RadialSolution:
    """Inverse of :func:`transform_r_to_t`; an s-coordinate orbit is shifted by beta first."""
    if trajectory.coordinate == "s":
        t = trajectory.s + config.shift(beta)
    else:
        t = trajectory.s.copy()
    order = np.argsort(-t)
    t = t[order]
    w, dw = trajectory.w[order], trajectory.dw[order]
    W, dW = _singular_values(config, t)
    if config.is_power:
        v = W * (w + 1.0)
        dv = dW * (w + 1.0) + W * dw
    else:
        v = W + w
        dv = dW + dw
    return RadialSolution(config, float(beta), t, v, dv, method="transformed",
                          tolerances={"rtol": trajectory.rtol, "atol": trajectory.atol},
                          apriori=apriori_bound(config))
