"""Gauss hypergeometric series, Frobenius indicial analysis, and the Lorentz
boost that turns the four-singular-point eigen-equation into a
hypergeometric one.

The eigen-equation of the boosted operator, written in z' = (y'+1)/2, is

    z'(1-z') psi'' + (lam - sqrt(1-alpha) - 2*lam*z') psi' - lam*(lam-1) psi = 0,

a standard 2F1 equation with a = lam-1, b = lam, c = lam - sqrt(1-alpha).
Local solutions at the two finite singular points are labelled h1..h4.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_TINY = 1e-300


def hyp2f1(a: complex, b: complex, c: complex, z: complex, tol: float = 1e-14,
           max_terms: int = 200_000):
    """Partial-sum evaluation of 2F1(a, b; c; z) for |z| < 1.

    Returns (value, terminated).  terminated is True when a or b is a
    nonpositive integer so the series is a polynomial; in that case any z
    is accepted.  Raises for nonpositive-integer c reached before
    termination and for non-convergent |z| >= 1 requests.
    """
    a, b, c, z = complex(a), complex(b), complex(c), complex(z)
    term = 1.0 + 0.0j
    total = term
    for n in range(max_terms):
        if abs(term) < _TINY:
            return total, True
        cn = c + n
        if abs(cn) < 1e-12:
            raise ValueError(f"c = {c} hits a nonpositive integer before termination")
        term = term * (a + n) * (b + n) / (cn * (n + 1)) * z
        total += term
        if abs(term) <= tol * max(1.0, abs(total)):
            # confirm the tail is actually shrinking (geometric regime)
            if abs(z) < 1.0 or abs(term) < _TINY:
                return total, abs(term) < _TINY
    if abs(z) >= 1.0:
        raise ValueError("series does not converge for |z| >= 1 and does not terminate")
    return total, False


class SingularPoint(Enum):
    """The two finite regular singular points of the boosted eigen-equation."""

    ZP_ZERO = 0   # z' = 0, i.e. y' = -1
    ZP_ONE = 1    # z' = 1, i.e. y' = +1


@dataclass(frozen=True)
class SingularPointData:
    location: SingularPoint
    lam: complex
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0,1]")


class FrobeniusBranch(Enum):
    H1 = "h1"  # shifted-exponent solution at z'=0
    H2 = "h2"  # analytic-exponent solution at z'=0
    H3 = "h3"  # shifted-exponent solution at z'=1 (local variable z''=1-z')
    H4 = "h4"  # analytic-exponent solution at z'=1


def branch_parameters(branch: FrobeniusBranch, lam: complex, alpha: float):
    """(a, b, c, exponent) of the 2F1 representing the given local solution."""
    g = math.sqrt(1.0 - alpha)
    lam = complex(lam)
    if branch is FrobeniusBranch.H1:
        return g, 1.0 + g, 2.0 - lam + g, 1.0 - lam + g
    if branch is FrobeniusBranch.H2:
        return lam - 1.0, lam, lam - g, 0.0 + 0.0j
    if branch is FrobeniusBranch.H3:
        return -g, 1.0 - g, 2.0 - lam - g, 1.0 - lam - g
    return lam - 1.0, lam, lam + g, 0.0 + 0.0j


def indicial_roots(pt: SingularPointData):
    """Indicial roots at the chosen singular point, ordered by real part.

    The indicial equation is s^2 + (p0 - 1)s = 0 with
    p0 = lam -/+ sqrt(1-alpha) at z' = 0 / z' = 1, so the roots are
    {0, 1 - lam +/- sqrt(1-alpha)}.  gap_is_natural flags s+ - s- in N
    (log-coupling analysis applies there).
    """
    g = math.sqrt(1.0 - pt.alpha)
    if pt.location is SingularPoint.ZP_ZERO:
        other = 1.0 - pt.lam + g
    else:
        other = 1.0 - pt.lam - g
    roots = sorted([0.0 + 0.0j, complex(other)], key=lambda s: -s.real)
    s_plus, s_minus = roots
    gap = s_plus - s_minus
    natural = abs(gap.imag) < 1e-10 and abs(gap.real - round(gap.real)) < 1e-10 \
        and round(gap.real) >= 0
    return s_plus, s_minus, natural


@dataclass
class FrobeniusSeries:
    """Truncated local series (z - z0)^exponent * sum c_n (z - z0)^n."""

    exponent: complex
    coefficients: list = field(default_factory=list)
    log_flag: bool = False
    radius_hint: float = 1.0

    def eval(self, z_local: complex) -> complex:
        acc = 0.0 + 0.0j
        for cn in reversed(self.coefficients):
            acc = acc * z_local + cn
        if self.exponent == 0:
            return acc
        return acc * z_local**self.exponent


def frobenius_series(pt: SingularPointData, branch: FrobeniusBranch, n_max: int,
                     z: complex):
    """Generate the local Frobenius solution by the 2F1 recurrence.

    z is the local variable (z' at ZP_ZERO, z'' = 1 - z' at ZP_ONE).  When
    the recurrence denominator (c + n) vanishes before the numerator has
    terminated, the analytic continuation must carry a log term: the
    obstruction is flagged and no further coefficients are produced.
    """
    if n_max < 8:
        raise ValueError("n_max must be at least 8")
    a, b, c, expo = branch_parameters(branch, pt.lam, pt.alpha)
    want_zero = pt.location is SingularPoint.ZP_ZERO
    is_zero_branch = branch in (FrobeniusBranch.H1, FrobeniusBranch.H2)
    if want_zero != is_zero_branch:
        raise ValueError(f"{branch.value} is not a local solution at {pt.location.name}")
    coeffs = [1.0 + 0.0j]
    log_flag = False
    term = 1.0 + 0.0j
    for n in range(n_max):
        if abs(term) < _TINY:
            break
        cn = c + n
        if abs(cn) < 1e-12:
            log_flag = True
            break
        term = term * (a + n) * (b + n) / (cn * (n + 1))
        coeffs.append(term)
    series = FrobeniusSeries(exponent=expo, coefficients=coeffs, log_flag=log_flag,
                             radius_hint=1.0)
    return series, series.eval(z)


def ratio_limit(branch: FrobeniusBranch, lam: complex, alpha: float, n_terms: int = 200):
    """Richardson-extrapolated coefficient ratio |c_{n+1}/c_n| of the branch.

    A limit of 1 certifies convergence radius exactly 1 (no smooth
    continuation past the opposite singular point); terminated=True means
    the series is a polynomial (the lam in {0, 1} symmetry modes).
    """
    if n_terms < 50:
        raise ValueError("need at least 50 terms for a stable extrapolation")
    a, b, c, _ = branch_parameters(branch, lam, alpha)
    term = 1.0 + 0.0j
    ratios = {}
    half = n_terms // 2
    for n in range(n_terms):
        cn = c + n
        if abs(cn) < 1e-12:
            return math.inf, False
        nxt = term * (a + n) * (b + n) / (cn * (n + 1))
        if abs(nxt) < _TINY:
            return 0.0, True
        if n + 1 in (half, n_terms):
            ratios[n + 1] = abs(nxt) / abs(term)
        term = nxt
    # ratio = L*(1 + e/n + ...): Richardson in 1/n
    r1, r2 = ratios[half], ratios[n_terms]
    return 2.0 * r2 - r1, False


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights for Chebyshev-Gauss-Lobatto nodes (ascending order)."""
    n = len(nodes) - 1
    w = np.ones(n + 1)
    w[0] = 0.5
    w[-1] = 0.5
    w *= (-1.0) ** np.arange(n + 1)
    return w


def barycentric_interp(nodes: np.ndarray, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Barycentric interpolation from CGL nodes; exact at coincident points."""
    w = barycentric_weights(nodes)
    out = np.empty(len(targets), dtype=np.result_type(values.dtype, np.float64))
    for i, xq in enumerate(targets):
        d = xq - nodes
        j = np.argmin(np.abs(d))
        if abs(d[j]) < 1e-14:
            out[i] = values[j]
            continue
        t = w / d
        out[i] = np.dot(t, values) / np.sum(t)
    return out


def lorentz_pullback(phi: np.ndarray, nodes: np.ndarray, lam: complex, gamma: float,
                     targets: np.ndarray | None = None) -> np.ndarray:
    """Boost a first-component eigenfunction between the two operator frames.

    Applies phi -> ((1 - gamma*y)/sqrt(1-gamma^2))^(-lam) * phi(m_gamma(y))
    with the Moebius map m_gamma(y) = (y - gamma)/(1 - gamma*y).  With
    gamma = +sqrt(1-alpha) this carries eigenfunctions of the original
    linearized operator to the boosted one; gamma = -sqrt(1-alpha) is the
    inverse direction.  The maps compose to the identity.
    """
    if not (-1.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (-1,1)")
    tg = nodes if targets is None else targets
    mapped_pts = (tg - gamma) / (1.0 - gamma * tg)
    vals = barycentric_interp(nodes, np.asarray(phi), mapped_pts)
    pref = ((1.0 - gamma * tg) / math.sqrt(1.0 - gamma * gamma)).astype(complex) ** (-complex(lam))
    return pref * vals


def eigen_equation_residual(phi: np.ndarray, nodes: np.ndarray, D: np.ndarray,
                            lam: complex, alpha: float, boosted: bool = False) -> float:
    """Scaled sup-norm residual of the scalar eigen-equation on the grid.

    boosted=False checks the original-frame equation
        (lam^2 + lam - 2*alpha*lam/(1+g*y))*phi
        + (2*lam + 2 - 2*alpha/(1+g*y))*y*phi' + (y^2-1)*phi'' = 0,
    boosted=True the hypergeometric-frame one
        (lam^2 - lam)*phi + (2*lam*y + 2*g)*phi' + (y^2-1)*phi'' = 0.
    """
    g = math.sqrt(1.0 - alpha)
    phi = np.asarray(phi, dtype=complex)
    p1 = D @ phi
    p2 = D @ p1
    y = nodes
    if boosted:
        res = (lam * lam - lam) * phi + (2.0 * lam * y + 2.0 * g) * p1 + (y * y - 1.0) * p2
    else:
        w = 1.0 + g * y
        res = ((lam * lam + lam - 2.0 * alpha * lam / w) * phi
               + (2.0 * lam + 2.0 - 2.0 * alpha / w) * y * p1
               + (y * y - 1.0) * p2)
    scale = np.max(np.abs(phi))
    return float(np.max(np.abs(res)) / scale) if scale > 0 else float(np.max(np.abs(res)))
