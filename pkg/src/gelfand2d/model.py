"""Problem definition, closed-form exponents and the explicit singular solutions.

The weight is

    V_k(r) = 1 / (r^2 (-log(r/e))^(2+k)),   0 < r < e,

and everything downstream works with rho = -log(r/e) = 1 - log r > 0 and the
log-log coordinate t = log(rho).  Points near r = 0 (t -> +inf) and near r = e
(t -> -inf) are carried in t; r is only materialised when it is representable
as a double strictly inside (0, e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError, GuardError

E = math.e
HARDY_CONSTANT = 0.25


@dataclass(frozen=True)
class Exponential:
    """f(u) = e^u."""

    name = "exp"


@dataclass(frozen=True)
class Power:
    """f(u) = (1 + u)^p, i.e. |v|^p for the normalised v-equation."""

    p: float
    name = "pow"


Nonlinearity = Union[Exponential, Power]


@dataclass(frozen=True)
class ProblemConfig:
    """The pair (k, nonlinearity).

    Construction enforces k > 0 (no radial solution exists otherwise) and,
    for the power case, p > p_s = k + 1.
    """

    k: float
    nonlinearity: Nonlinearity = field(default_factory=Exponential)

    def __post_init__(self):
        k = float(self.k)
        if not math.isfinite(k) or k <= 0:
            raise GuardError(
                "nonexistence",
                f"k = {self.k!r} <= 0",
                f"nonexistence guard violated: k = {self.k!r} <= 0 "
                "(the radial problem has no solution unless k > 0)",
            )
        object.__setattr__(self, "k", k)
        if isinstance(self.nonlinearity, Power):
            p = float(self.nonlinearity.p)
            if not math.isfinite(p) or p <= k + 1:
                raise GuardError(
                    "exponent",
                    f"p = {self.nonlinearity.p!r} <= p_s = k+1 = {k + 1!r}",
                    f"exponent guard violated: p = {self.nonlinearity.p!r} <= p_s = k+1 = {k + 1!r} "
                    "(f(u) = (1+u)^p requires p > p_s)",
                )
        elif not isinstance(self.nonlinearity, Exponential):
            raise TypeError(f"unknown nonlinearity {self.nonlinearity!r}")

    @classmethod
    def exponential(cls, k):
        return cls(k, Exponential())

    @classmethod
    def power(cls, k, p):
        return cls(k, Power(float(p)))

    @property
    def is_power(self) -> bool:
        return isinstance(self.nonlinearity, Power)

    @property
    def p(self) -> float | None:
        return self.nonlinearity.p if self.is_power else None

    @property
    def theta(self) -> float | None:
        """k/(p-1); lies in (0, 1) for admissible power configs."""
        if not self.is_power:
            return None
        return self.k / (self.nonlinearity.p - 1.0)

    @property
    def label(self) -> str:
        if self.is_power:
            return f"pow(k={self.k:g}, p={self.p:g})"
        return f"exp(k={self.k:g})"

    def f(self, v):
        """Nonlinearity of the normalised equation: e^v or |v|^p."""
        if self.is_power:
            return np.abs(v) ** self.p
        return np.exp(v)

    def fprime_bound(self, beta: float) -> float:
        """Upper bound for |f'| on [-|beta|, beta] (used for contraction radii)."""
        if self.is_power:
            return self.p * abs(beta) ** (self.p - 1.0)
        return math.exp(beta)

    # shift maps between the canonical coordinate s and t for center value beta:
    #   s = t - shift(beta)
    def shift(self, beta: float) -> float:
        if self.is_power:
            if beta <= 0:
                raise DomainError("center-value", f"beta = {beta!r} <= 0",
                                  f"power case requires beta > 0, got {beta!r}")
            return math.log(beta) / self.theta
        return beta / self.k - math.log(self.k) / self.k

    def beta_at(self, s: float) -> float:
        """Center value beta whose family member is evaluated at r = 1 (t = 0) by s."""
        if self.is_power:
            return math.exp(-self.theta * s)
        return math.log(self.k) - self.k * s


# -- coordinates --------------------------------------------------------------

def rho_of_r(r):
    """-log(r/e), validated to lie in (0, inf)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr > 0)) or np.any(~(r_arr < E)):
        raise DomainError("radius", "r must satisfy 0 < r < e",
                          f"radius outside (0, e): {r!r}")
    out = 1.0 - np.log(r_arr)
    return float(out) if out.ndim == 0 else out


def t_of_r(r):
    return np.log(rho_of_r(r))


def r_of_t(t):
    """exp(1 - e^t); underflows to 0 for t >~ 6.57 and rounds to e for t <~ -36."""
    out = np.exp(1.0 - np.exp(np.asarray(t, dtype=float)))
    return float(out) if out.ndim == 0 else out


def r_representable(t) -> np.ndarray:
    r = np.asarray(r_of_t(t))
    return (r > 0) & (r < E)


def weight_eval(k: float, r):
    """Evaluate V_k(r) = 1/(r^2 (-log(r/e))^(2+k)).

    Raises
    ------
    GuardError
        If k <= 0.
    DomainError
        If r is not in (0, e).
    """
    ProblemConfig.exponential(k)  # k guard
    rho = rho_of_r(r)
    out = 1.0 / (np.asarray(r, dtype=float) ** 2 * rho ** (2.0 + k))
    return float(out) if np.ndim(out) == 0 else out


# -- exponents ----------------------------------------------------------------

@dataclass(frozen=True)
class ExponentTable:
    """Critical exponents for a given k, optionally with config-dependent data.

    ``p_jl_plus`` is ``math.inf`` (an IEEE infinity, ordered above every real)
    when k >= 1/4.
    """

    k: float
    p_s: float
    p_jl_minus: float
    p_c: float
    p_jl_plus: float
    eig_pair: tuple[complex, complex] | None = None
    hardy_coefficient: float | None = None

    def ordered(self) -> bool:
        return 1.0 < self.p_s < self.p_jl_minus < self.p_c < self.p_jl_plus


def critical_exponents(k: float) -> ExponentTable:
    """p_s = k+1, p_c = 2k+1 and the two roots p_JL-/+ of c(p) = 1/4.

    With c(p) = (kp/(p-1))(1 - k/(p-1)) the roots are
    1 + 2k/(1 - k +/- sqrt(k(k+2))); the upper one is infinite for k >= 1/4.
    """
    ProblemConfig.exponential(k)
    k = float(k)
    root = math.sqrt(k * (k + 2.0))
    p_minus = 1.0 + 2.0 * k / (1.0 - k + root)
    denom = 1.0 - k - root
    p_plus = math.inf if k >= 0.25 or denom <= 0 else 1.0 + 2.0 * k / denom
    return ExponentTable(k=k, p_s=k + 1.0, p_jl_minus=p_minus, p_c=2.0 * k + 1.0,
                         p_jl_plus=p_plus)


def hardy_coefficient(config: ProblemConfig) -> float:
    """Coefficient c of 1/(|x|^2 log^2(e/|x|)) in the linearisation at U*.

    c = k (exponential) and c = (kp/(p-1))(1 - k/(p-1)) = (k + theta)(1 - theta)
    (power).
    """
    if config.is_power:
        th = config.theta
        return (config.k + th) * (1.0 - th)
    return config.k


def _characteristic(config: ProblemConfig) -> tuple[float, float]:
    # mu^2 + b mu + c0 = 0
    if config.is_power:
        th = config.theta
        return 2.0 * th - 1.0, config.k * (1.0 - th)
    return -1.0, config.k


def linearization_eigenvalues(config: ProblemConfig) -> tuple[complex, complex]:
    """Roots (lambda_+, lambda_-) of the linearised Emden-Fowler equation at w = 0.

    The discriminant is written as 1 - 4c with c the Hardy coefficient, which
    is an algebraic identity for both nonlinearities and keeps the
    complex-iff-c>1/4 equivalence exact in floating point.
    """
    b, _ = _characteristic(config)
    disc = 1.0 - 4.0 * hardy_coefficient(config)
    if disc >= 0:
        sq = math.sqrt(disc)
        return complex((-b + sq) / 2.0), complex((-b - sq) / 2.0)
    sq = math.sqrt(-disc)
    return complex(-b / 2.0, sq / 2.0), complex(-b / 2.0, -sq / 2.0)


def oscillation_predicate(config: ProblemConfig) -> bool:
    """True iff solutions of the linearised equation change sign infinitely often."""
    return hardy_coefficient(config) > HARDY_CONSTANT


def exponent_table(config: ProblemConfig) -> ExponentTable:
    base = critical_exponents(config.k)
    return ExponentTable(k=base.k, p_s=base.p_s, p_jl_minus=base.p_jl_minus, p_c=base.p_c,
                         p_jl_plus=base.p_jl_plus,
                         eig_pair=linearization_eigenvalues(config),
                         hardy_coefficient=hardy_coefficient(config))


def apriori_constant(config: ProblemConfig) -> float:
    """C_1 of the pointwise upper bound for regular solutions.

    Exponential: v <= k log(rho) + C_1 with C_1 = log(k(k+1)).
    Power:       v <= C_1 rho^(k/(p-1)) with C_1 = (k(1+k)/(p-1))^(1/(p-1)).
    """
    k = config.k
    if config.is_power:
        return (k * (1.0 + k) / (config.p - 1.0)) ** (1.0 / (config.p - 1.0))
    return math.log(k * (k + 1.0))


# -- singular solutions ------------------------------------------------------

@dataclass(frozen=True)
class SingularSolutionInfo:
    """Closed-form singular solution W of the v-equation and U* of the original problem.

    Exponential: W = k log(rho) + log k, U* = W - log(lambda*) = k log(rho).
    Power:       W = A rho^theta with A = (theta(1-theta))^(theta/k),
                 U* = lambda*^(-1/(p-1)) W - 1 = rho^theta - 1.
    """

    config: ProblemConfig
    lambda_star: float
    amplitude: float  # log k (exp) or A (power)
    h1_member: bool

    def W_of_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.config.is_power:
            return self.amplitude * np.exp(self.config.theta * t)
        return self.config.k * t + self.amplitude

    def dW_dt(self, t):
        t = np.asarray(t, dtype=float)
        if self.config.is_power:
            return self.config.theta * self.amplitude * np.exp(self.config.theta * t)
        return np.full_like(t, self.config.k)

    def W(self, r):
        return self.W_of_t(t_of_r(r))

    def U_star_of_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.config.is_power:
            return np.expm1(self.config.theta * t)
        return self.config.k * t

    def U_star(self, r):
        return self.U_star_of_t(t_of_r(r))


def singular_solution(config: ProblemConfig) -> SingularSolutionInfo:
    k = config.k
    if config.is_power:
        th = config.theta
        lam = th * (1.0 - th)
        amp = lam ** (th / k)
        member = config.p > critical_exponents(k).p_c
        return SingularSolutionInfo(config, lam, amp, member)
    return SingularSolutionInfo(config, k, math.log(k), True)


def _singular_terms(config: ProblemConfig, rho):
    """r^2 W'', r W', r^2 V_k f(W) as functions of rho (all finite for rho in (0, inf))."""
    k = config.k
    info = singular_solution(config)
    rho = np.asarray(rho, dtype=float)
    if config.is_power:
        th, A = config.theta, info.amplitude
        W = A * rho ** th
        t1 = th * A * rho ** (th - 2.0) * (rho + th - 1.0)
        t2 = -th * A * rho ** (th - 1.0)
    else:
        W = k * np.log(rho) + math.log(k)
        t1 = k * (rho - 1.0) / rho ** 2
        t2 = -k / rho
    t3 = rho ** (-2.0 - k) * config.f(W)
    return t1, t2, t3


def singular_residual_t(config: ProblemConfig, t, relative: bool = True):
    """Defect of W in v'' + v'/r + V_k f(v) = 0 at log-log coordinate t.

    The three terms are evaluated separately (scaled by r^2) and summed; with
    ``relative`` the sum is divided by the sum of their magnitudes.
    """
    rho = np.exp(np.asarray(t, dtype=float))
    t1, t2, t3 = _singular_terms(config, rho)
    res = t1 + t2 + t3
    if relative:
        res = res / (np.abs(t1) + np.abs(t2) + np.abs(t3))
    return float(res) if np.ndim(res) == 0 else res


def singular_residual(config: ProblemConfig, r, relative: bool = True):
    """Same as :func:`singular_residual_t` but addressed by the radius r in (0, e)."""
    rho = rho_of_r(r)
    t1, t2, t3 = _singular_terms(config, rho)
    res = t1 + t2 + t3
    if relative:
        res = res / (np.abs(t1) + np.abs(t2) + np.abs(t3))
    else:
        res = res / np.asarray(r, dtype=float) ** 2
    return float(res) if np.ndim(res) == 0 else res


def singular_flux_defect(config: ProblemConfig, t) -> float:
    """max_t | -r W'(r) - int_0^r s V_k f(W) ds | / | r W'(r) |, integral by quadrature.

    In t the identity reads e^{-t} W_t(t) = int_t^inf f(W(u)) e^{-(1+k)u} du.
    Both sides grow like e^{-t} toward r = e, so the defect is relative.
    """
    info = singular_solution(config)
    k = config.k
    worst = 0.0
    for ti in np.atleast_1d(np.asarray(t, dtype=float)):
        lhs = math.exp(-ti) * float(info.dW_dt(ti))
        if config.is_power:
            log_f = lambda u: config.p * (math.log(info.amplitude) + config.theta * u)
        else:
            log_f = lambda u: float(info.W_of_t(u))
        # integrate the integrand normalised by its value at u = ti, so that
        # the quadrature works at O(1) scale for every ti
        head = log_f(ti) - (1.0 + k) * ti
        integrand = lambda x: math.exp(log_f(ti + x) - (1.0 + k) * (ti + x) - head)
        val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
        rhs = math.exp(head) * val
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return worst


@dataclass(frozen=True)
class H1Report:
    """Partial Dirichlet integrals of U* over B_1 in the tau = log(rho) coordinate."""

    member: bool
    closed_form: bool
    window: float
    partial_integrals: tuple[tuple[float, float], ...]  # (T, int_0^T)
    increment_ratio: float
    limit: float  # extrapolated value, inf when divergent


def singular_h1_membership(config: ProblemConfig, window: float = 20.0,
                           n_windows: int = 6) -> tuple[bool, H1Report]:
    """Decide whether the Dirichlet energy of U* over B_1 is finite.

    int_{B_1} |grad U*|^2 dx = 2 pi int_0^inf (dU*/dtau)^2 e^{-tau} dtau.  The
    integral is accumulated over equal tau-windows; the ratio of the last two
    window increments estimates e^{(growth rate) * window}, and the integral
    converges iff that ratio is below one.
    """
    info = singular_solution(config)
    if config.is_power:
        th = config.theta
        integrand = lambda u: 2.0 * math.pi * th * th * math.exp((2.0 * th - 1.0) * u)
    else:
        k2 = config.k ** 2
        integrand = lambda u: 2.0 * math.pi * k2 * math.exp(-u)
    total = 0.0
    partial = []
    increments = []
    for j in range(n_windows):
        d, _ = integrate.quad(integrand, j * window, (j + 1) * window, epsabs=0.0, epsrel=1e-13)
        increments.append(d)
        total += d
        partial.append(((j + 1) * window, total))
    ratio = increments[-1] / increments[-2]
    member = ratio < 1.0 - 1e-8
    limit = total + increments[-1] * ratio / (1.0 - ratio) if member else math.inf
    report = H1Report(member=member, closed_form=info.h1_member, window=window,
                      partial_integrals=tuple(partial), increment_ratio=ratio, limit=limit)
    return member, report

