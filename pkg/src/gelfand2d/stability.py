"""Stability quadratic form at the singular solution and the Morse-index dichotomy.

For a radial test function phi supported in the unit ball, with
tau = log(log(R/r)), the form

    Q(phi) = int |grad phi|^2 dx - c int phi^2 / (|x|^2 log^2(R/|x|)) dx

reduces exactly to 2 pi int ((dphi/dtau)^2 - c phi^2) e^{-tau} dtau.  All
integrals are evaluated in the scaled variable xi = e^{-tau/2} phi,

    Q = 2 pi int ((xi' + xi/2)^2 - c xi^2) dtau,

which stays O(1) on bands far out in tau where phi itself would overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError
from .model import HARDY_CONSTANT, ProblemConfig, hardy_coefficient

QUAD_EPSREL = 1e-10


class MorseIndex(str, enum.Enum):
    ZERO = "Zero"
    INFINITE = "Infinite"


class RadialTestFunction:
    """Compactly supported radial function described in tau.

    Subclasses provide ``support`` (a, b), ``breakpoints`` and ``scaled(tau)``
    returning (xi, xi') with xi = e^{-tau/2} phi.
    """

    support: tuple[float, float]

    @property
    def breakpoints(self) -> np.ndarray:
        return np.asarray(self.support, dtype=float)

    def scaled(self, tau):
        raise NotImplementedError

    def phi(self, tau):
        """phi itself (may overflow for large tau)."""
        tau = np.asarray(tau, dtype=float)
        return np.exp(tau / 2.0) * self.scaled(tau)[0]


@dataclass(frozen=True)
class TestFunctionBand(RadialTestFunction):
    """phi = e^{tau/2} sin(eps tau / 2) on [2 pi n/eps, 2 pi (n+1)/eps], zero elsewhere.

    In r the band is [r_{n+1}, r_n] with r_n = R exp(-exp(2 pi n / eps));
    those radii underflow for n >= 1 and are never formed.
    """

    __test__ = False  # not a pytest class

    epsilon: float
    n: int
    R: float = math.e

    @property
    def support(self):
        return (2.0 * math.pi * self.n / self.epsilon, 2.0 * math.pi * (self.n + 1) / self.epsilon)

    def scaled(self, tau):
        tau = np.asarray(tau, dtype=float)
        h = 0.5 * self.epsilon
        return np.sin(h * tau), h * np.cos(h * tau)

    def closed_form(self, c: float) -> float:
        """(2 pi^2 / eps) (1/4 - c + eps^2/4)."""
        eps = self.epsilon
        return 2.0 * math.pi ** 2 / eps * (0.25 - c + 0.25 * eps * eps)


@dataclass(frozen=True)
class PiecewiseLinearTestFunction(RadialTestFunction):
    """phi linear in tau between ``nodes``; must vanish at the first and last node."""

    nodes: tuple
    values: tuple

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise DomainError("test-function", "nodes must be strictly increasing")
        if len(self.values) != nodes.size:
            raise DomainError("test-function", "one value per node required")

    @property
    def support(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def breakpoints(self):
        return np.asarray(self.nodes, dtype=float)

    def scaled(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = np.asarray(self.nodes, dtype=float)
        y = np.asarray(self.values, dtype=float)
        phi = np.interp(tau, x, y, left=0.0, right=0.0)
        idx = np.clip(np.searchsorted(x, tau, side="right") - 1, 0, x.size - 2)
        slope = (y[idx + 1] - y[idx]) / (x[idx + 1] - x[idx])
        slope = np.where((tau < x[0]) | (tau > x[-1]), 0.0, slope)
        g = np.exp(-tau / 2.0)
        return g * phi, g * (slope - 0.5 * phi)


def _check_admissible(phi: RadialTestFunction, R: float):
    a, b = phi.support
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("test-function", "support must be bounded",
                          f"test function support [{a}, {b}] is unbounded")
    if R < 1:
        raise DomainError("radius", f"R = {R!r} < 1")
    tau_one = math.log(math.log(R)) if R > 1 else -math.inf
    if a < tau_one - 1e-12:
        raise DomainError("test-function", f"support start {a} < log log R = {tau_one}",
                          "test function support reaches outside the unit ball")
    xa, _ = phi.scaled(a)
    xb, _ = phi.scaled(b)
    scale = max(1.0, float(np.max(np.abs(phi.scaled(np.linspace(a, b, 33))[0]))))
    if abs(float(xa)) > 1e-12 * scale or abs(float(xb)) > 1e-12 * scale:
        raise DomainError("test-function", "phi must vanish at the ends of its support",
                          f"phi does not vanish at the support ends ({float(xa)}, {float(xb)})")


def hardy_quadratic_form(c: float, phi: RadialTestFunction, R: float = math.e) -> float:
    """Q(phi) = 2 pi int ((phi')^2 - c phi^2) e^{-tau} dtau with adaptive quadrature.

    Raises
    ------
    DomainError
        If phi does not vanish at its support ends, the support is unbounded
        or leaves the unit ball.
    """
    _check_admissible(phi, R)

    def integrand(tau):
        xi, dxi = phi.scaled(tau)
        return float((dxi + 0.5 * xi) ** 2 - c * xi * xi)

    def magnitude(tau):
        xi, dxi = phi.scaled(tau)
        return (dxi + 0.5 * xi) ** 2 + abs(c) * xi * xi

    pts = phi.breakpoints
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        # absolute floor scaled to the piece, for pieces where the two terms cancel
        size = (hi - lo) * float(np.max(magnitude(np.linspace(lo, hi, 17))))
        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-3 * QUAD_EPSREL * size,
                                epsrel=QUAD_EPSREL, limit=200)
        total += val
    return 2.0 * math.pi * total


def destabilizing_band(epsilon: float, n: int, R: float = math.e) -> TestFunctionBand:
    """Band test function of index n; Q < 0 on it whenever c >= (1 + eps)/4."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError("band", f"epsilon = {epsilon!r} not in (0, 1)")
    if int(n) != n or n < 0:
        raise DomainError("band", f"n = {n!r} is not a non-negative integer")
    return TestFunctionBand(float(epsilon), int(n), R)


@dataclass(frozen=True)
class StabilityReport:
    c: float
    morse: MorseIndex
    band_values: list = field(default_factory=list)  # (n, epsilon, Q)
    threshold_margin: float = 0.0

    def as_dict(self):
        return {"c": self.c, "morse": self.morse.value,
                "bands": [{"n": n, "epsilon": e, "Q": q} for n, e, q in self.band_values],
                "margin": self.threshold_margin}


def morse_classification(config: ProblemConfig, n_bands: int = 3) -> StabilityReport:
    """Morse index of the singular solution: zero iff c <= 1/4.

    For an infinite index the report carries Q on bands n = 0..n_bands-1 with
    eps = min(4c - 1, 1/2); their supports are disjoint, so each negative
    value is an independent destabilising direction.
    """
    c = hardy_coefficient(config)
    margin = c - HARDY_CONSTANT
    if c <= HARDY_CONSTANT:
        return StabilityReport(c, MorseIndex.ZERO, [], margin)
    eps = min(4.0 * c - 1.0, 0.5)
    bands = []
    for n in range(n_bands):
        band = destabilizing_band(eps, n)
        bands.append((n, eps, hardy_quadratic_form(c, band)))
    return StabilityReport(c, MorseIndex.INFINITE, bands, margin)
