"""Closed-form blow-up profiles for the two derivative nonlinear wave models.

The non-null model is  u_tt - u_xx = (u_t)^2,  the null-form model is
u_tt - u_xx = (u_t)^2 - (u_x)^2.  Both admit a family of solutions

    u(t, x) = -alpha*log(T - t) + U(y) + kappa,    y = (x - x0)/(T - t),

smooth inside the backward light cone |x - x0| <= T - t.  This module
evaluates the profiles U, their derivatives, the potentials entering the
linearized operators, the Riccati deformation of the non-null family, and
the (singular) exact self-similar family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad


class EquationKind(Enum):
    """Which quadratic nonlinearity drives the wave equation."""

    NON_NULL = "nonnull"    # u_tt - u_xx = (u_t)^2
    NULL_FORM = "nullform"  # u_tt - u_xx = (u_t)^2 - (u_x)^2


class BetaBranchKind(Enum):
    ZERO = "zero"
    FINITE = "finite"
    INFINITY = "inf"


@dataclass(frozen=True)
class BetaBranch:
    """Profile branch selector: beta = 0, a finite positive value, or infinity.

    Infinity is an explicit variant, never a float sentinel, so the
    closed forms for that branch are used directly.
    """

    kind: BetaBranchKind
    value: float | None = None

    def __post_init__(self):
        if self.kind is BetaBranchKind.FINITE:
            if self.value is None or not (self.value > 0):
                raise ValueError("finite beta branch requires beta > 0")
        elif self.value is not None:
            raise ValueError("zero/infinity branches carry no beta value")

    @staticmethod
    def zero() -> "BetaBranch":
        return BetaBranch(BetaBranchKind.ZERO)

    @staticmethod
    def finite(value: float) -> "BetaBranch":
        return BetaBranch(BetaBranchKind.FINITE, float(value))

    @staticmethod
    def infinity() -> "BetaBranch":
        return BetaBranch(BetaBranchKind.INFINITY)

    def __str__(self):
        if self.kind is BetaBranchKind.FINITE:
            return f"beta={self.value:g}"
        return f"beta={self.kind.value}"


def _is_positive_integer(a: float, tol: float = 1e-12) -> bool:
    return a > 0.5 and abs(a - round(a)) <= tol


def check_admissible(eq: EquationKind, alpha: float, beta: BetaBranch) -> None:
    """Validate (alpha, beta) against the smooth-family parameter sets.

    Non-null:  alpha in (0, 1] and beta in {0, infinity}.
    Null-form: alpha a positive integer and beta finite positive.
    """
    if eq is EquationKind.NON_NULL:
        if beta.kind is BetaBranchKind.FINITE:
            raise ValueError(
                "non-null smooth profiles require beta in {0, inf}; "
                "finite beta is only available through profile_eval on (-1,1)")
        if not (0.0 < alpha <= 1.0):
            raise ValueError(f"non-null family needs alpha in (0,1], got {alpha}")
    else:
        if beta.kind is not BetaBranchKind.FINITE:
            raise ValueError("null-form smooth profiles require finite beta > 0")
        if not _is_positive_integer(alpha):
            raise ValueError(f"null-form family needs integer alpha >= 1, got {alpha}")


@dataclass(frozen=True)
class ProfileParams:
    """One member of the five-parameter blow-up family.

    The solution is evaluated as u = -alpha*log(T-t) + U(y) + kappa; the
    additive constant alpha*log(T) that would turn the first term into
    -alpha*log(1 - t/T) is folded into kappa.
    """

    eq: EquationKind
    alpha: float
    beta: BetaBranch
    kappa: float = 0.0
    T: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if not (self.T > 0):
            raise ValueError("blow-up time T must be positive")
        check_admissible(self.eq, self.alpha, self.beta)


def riccati_g(alpha: float, beta: float, y: float) -> float:
    """Riccati deformation g connecting the beta=inf profile to finite beta.

    Closed form valid for alpha in (0,1), beta >= 0, y in (-1,1).  The
    normalization satisfies beta = (1-alpha)/g(0) - sqrt(1-alpha)/(2*alpha).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("riccati_g requires alpha in (0,1); alpha=1 is degenerate")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if not (-1.0 < y < 1.0):
        raise ValueError("y must lie in (-1,1)")
    g = math.sqrt(1.0 - alpha)
    num = 2.0 * alpha * (1.0 - alpha) * (1.0 + y) ** g
    den = (2.0 * alpha * beta * (1.0 - y) ** g * (1.0 + g * y) ** 2
           + g * (1.0 + y) ** g * (1.0 - (1.0 - alpha) * y * y))
    return num / den


def beta_from_g0(alpha: float, g0: float) -> float:
    """Invert the beta <-> g(0) relation."""
    return (1.0 - alpha) / g0 - math.sqrt(1.0 - alpha) / (2.0 * alpha)


def _nonnull_finite_profile(alpha: float, beta: float, y: float) -> float:
    base = -alpha * math.log1p(math.sqrt(1.0 - alpha) * y)
    corr, _ = quad(lambda z: riccati_g(alpha, beta, z), 0.0, y, limit=200)
    return base + corr


def profile_eval(eq: EquationKind, alpha: float, beta: BetaBranch, y: float):
    """Evaluate the profile and the linearization potentials at y.

    Returns (U, U', V_time, V_space) where V_time = alpha + y*U' is the
    source of the 2*(d_s U + y d_y U) coefficient and V_space = U' enters
    only the null-form operator.

    Non-null finite-beta profiles are defined by quadrature of riccati_g
    and only on the open interval; no endpoint smoothness is claimed.
    """
    if eq is EquationKind.NON_NULL:
        if beta.kind is BetaBranchKind.FINITE:
            if not (0.0 < alpha < 1.0):
                raise ValueError("non-null finite-beta evaluation needs alpha in (0,1)")
            if not (-1.0 < y < 1.0):
                raise ValueError("non-null finite-beta profiles are evaluated on (-1,1) only")
            g = math.sqrt(1.0 - alpha)
            U = _nonnull_finite_profile(alpha, beta.value, y)
            Up = -alpha * g / (1.0 + g * y) + riccati_g(alpha, beta.value, y)
            return U, Up, alpha + y * Up, Up
        check_admissible(eq, alpha, beta)
        if not (-1.0 <= y <= 1.0):
            raise ValueError("y must lie in [-1,1]")
        g = math.sqrt(1.0 - alpha)
        sign = -1.0 if beta.kind is BetaBranchKind.ZERO else 1.0
        # U = -alpha*log(1 + sign*g*y); V_time collapses to alpha/(1 + sign*g*y)
        U = -alpha * math.log1p(sign * g * y)
        Up = -alpha * sign * g / (1.0 + sign * g * y)
        Vt = alpha / (1.0 + sign * g * y)
        return U, Up, Vt, Up

    check_admissible(eq, alpha, beta)
    if not (-1.0 <= y <= 1.0):
        raise ValueError("y must lie in [-1,1]")
    b = beta.value
    a = alpha
    # U = -log((1+y)^a + b*(1-y)^a) + log(1+b)
    p, q = (1.0 + y) ** a, (1.0 - y) ** a
    U = -math.log(p + b * q) + math.log1p(b)
    # integer alpha keeps the powers finite at the endpoints (0**0 == 1)
    pd = a * (1.0 + y) ** (a - 1.0)
    qd = a * (1.0 - y) ** (a - 1.0)
    Up = -(pd - b * qd) / (p + b * q)
    return U, Up, a + y * Up, Up


def blowup_solution_eval(params: ProfileParams, t: float, x: float):
    """Evaluate u and its first derivatives at a physical point in the cone.

    u_t = V_time(y)/(T-t) and u_x = U'(y)/(T-t) by the chain rule through
    (s, y) = (-log(T-t), (x-x0)/(T-t)).
    """
    Tt = params.T - t
    if not (0.0 <= t < params.T):
        raise ValueError("t must lie in [0, T)")
    y = (x - params.x0) / Tt
    if abs(y) > 1.0 + 1e-14:
        raise ValueError("(t, x) lies outside the backward light cone")
    y = min(1.0, max(-1.0, y))
    U, Up, Vt, _ = profile_eval(params.eq, params.alpha, params.beta, y)
    u = -params.alpha * math.log(Tt) + U + params.kappa
    return u, Vt / Tt, Up / Tt


def pde_residual(params: ProfileParams, samples: Sequence[tuple], h: float = 1e-4) -> float:
    """Max |u_tt - u_xx - nonlinearity| over samples by central differences.

    Samples must keep a margin of at least 2h from the cone boundary and
    from t = T; for exact family members the residual is pure O(h^2)
    discretization error.
    """
    worst = 0.0
    for (t, x) in samples:
        Tt = params.T - t
        if Tt <= 2.0 * h or abs(x - params.x0) > Tt - 2.0 * h:
            raise ValueError(f"sample (t={t}, x={x}) too close to the cone boundary")
        u = lambda tt, xx: blowup_solution_eval(params, tt, xx)[0]
        u00 = u(t, x)
        utt = (u(t + h, x) - 2.0 * u00 + u(t - h, x)) / h**2
        uxx = (u(t, x + h) - 2.0 * u00 + u(t, x - h)) / h**2
        ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h)
        res = utt - uxx - ut**2
        if params.eq is EquationKind.NULL_FORM:
            ux = (u(t, x + h) - u(t, x - h)) / (2.0 * h)
            res += ux**2
        worst = max(worst, abs(res))
    return worst


def field_residual(eq: EquationKind, u: Callable[[float, float], float],
                   samples: Sequence[tuple], h: float = 1e-4) -> float:
    """pde_residual for an arbitrary callable field (perturbation studies)."""
    worst = 0.0
    for (t, x) in samples:
        u00 = u(t, x)
        utt = (u(t + h, x) - 2.0 * u00 + u(t - h, x)) / h**2
        uxx = (u(t, x + h) - 2.0 * u00 + u(t, x - h)) / h**2
        ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h)
        res = utt - uxx - ut**2
        if eq is EquationKind.NULL_FORM:
            ux = (u(t, x + h) - u(t, x - h)) / (2.0 * h)
            res += ux**2
        worst = max(worst, abs(res))
    return worst


def singular_denominator(eq: EquationKind, d: float, y: float) -> float:
    """Denominator of the exact (singular) self-similar integrand."""
    if eq is EquationKind.NON_NULL:
        return 2.0 * y + (y * y - 1.0) * math.log(abs((1.0 + y) / (1.0 - y))) + d * (y * y - 1.0)
    # null form: (y^2-1)*(d + 0.5*log|(1+y)/(1-y)|); the bracket carries the root
    return d + 0.5 * math.log(abs((1.0 + y) / (1.0 - y)))


def singular_selfsim_root(eq: EquationKind, d: float, tol: float = 1e-12) -> float:
    """Root y* in (-1,1) of the exact self-similar denominator, by bisection.

    Existence follows from the endpoint limits (the non-null denominator
    tends to +2 and -2 at y = +1 and y = -1).
    """
    f = lambda y: singular_denominator(eq, d, y)
    lo, hi = -1.0 + 1e-13, 1.0 - 1e-13
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RuntimeError("no sign change found; unexpected for this family")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def sample_interior_cone(params: ProfileParams, n: int, margin: float,
                         rng: np.random.Generator) -> list:
    """Random (t, x) inside the cone, away from t = T.

    Central differences of step h need fourth derivatives bounded on the
    stencil; those scale like (T-t)^-4, so samples stay in t <= T/2 and a
    margin of max(10%, 3*margin) from the lateral boundary.
    """
    out = []
    while len(out) < n:
        t = rng.uniform(0.05 * params.T, 0.5 * params.T)
        r = (params.T - t) - max(0.1 * (params.T - t), 3.0 * margin)
        x = params.x0 + rng.uniform(-r, r)
        out.append((t, x))
    return out
