"""Chebyshev collocation of the linearized operators and the Sobolev Gram
forms used for dissipativity and spectral work.

States are pairs q = (q1, q2) of grid functions stacked as one vector of
length 2*(N+1); the first block row of every operator is q2 - y*d_y q1.
No boundary rows are imposed: the principal part (y^2-1)*d_yy degenerates
at y = +-1 so collocation on the closed interval is well posed as is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .profiles import BetaBranch, BetaBranchKind, EquationKind, profile_eval


def cheb_nodes_diff(N: int):
    """Chebyshev-Gauss-Lobatto nodes (ascending) and differentiation matrix."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(N + 1)
    x = np.cos(np.pi * n / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** n
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x[::-1].copy(), D[::-1, ::-1].copy()


def clenshaw_curtis(N: int) -> np.ndarray:
    """Clenshaw-Curtis quadrature weights on the CGL nodes (ascending)."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:N]) / (4 * k * k - 1)
        v -= np.cos(N * theta[1:N]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:N]) / (4 * k * k - 1)
    w[1:N] = 2.0 * v / N
    return w[::-1].copy()


@dataclass(frozen=True)
class Discretization:
    """CGL collocation data: nodes, differentiation matrix, CC weights."""

    N: int
    nodes: np.ndarray
    D: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.N + 1

    def dmatrix(self, order: int) -> np.ndarray:
        # negative-sum trick at each power: constants stay exactly in the
        # kernel, which tightens round-off in kernel-mode residuals
        out = np.eye(self.size)
        for _ in range(order):
            out = self.D @ out
            out -= np.diag(out @ np.ones(self.size))
        return out

    def filter_matrix(self, p: int = 16, c: float = 36.0,
                      j_ref: int | None = None) -> np.ndarray:
        """Exponential Chebyshev-coefficient filter (kills node-scale noise).

        Maps values -> coefficients -> damped coefficients -> values; on
        resolved smooth functions the perturbation is ~1e-12.  j_ref sets
        an absolute mode scale for the damping (default: N, i.e. relative).
        """
        N = self.N
        j = np.arange(N + 1)
        sig = np.exp(-c * (j / (j_ref if j_ref is not None else N)) ** p)
        i = np.arange(N + 1)
        V = np.cos(np.pi * np.outer(N - i, j) / N)       # T_j at ascending nodes
        half = np.ones(N + 1)
        half[0] = half[N] = 0.5
        C = (2.0 / N) * half[:, None] * np.cos(np.pi * np.outer(j, N - i) / N) * half[None, :]
        return V @ (sig[:, None] * C)

    def filter_state(self, q: np.ndarray) -> np.ndarray:
        F = self.filter_matrix()
        M = self.size
        out = np.array(q, copy=True)
        out[:M] = F @ out[:M]
        out[M:] = F @ out[M:]
        return out


def build_discretization(N: int) -> Discretization:
    if N < 8:
        raise ValueError("N must be >= 8")
    x, D = cheb_nodes_diff(N)
    return Discretization(N=N, nodes=x, D=D, weights=clenshaw_curtis(N))


class OperatorKind(Enum):
    FREE_WAVE = "free_wave"
    L_ALPHA = "l_alpha"          # non-null, beta = infinity branch
    L_PRIME_ALPHA = "l_prime"    # Lorentz-boosted frame
    L2_ALPHA_BETA = "l2_beta"    # null form, finite beta


@dataclass(frozen=True)
class OperatorMatrix:
    kind: OperatorKind
    alpha: float
    beta: float | None
    entries: np.ndarray
    grid: Discretization

    def to_csv(self, path: str) -> None:
        np.savetxt(path, self.entries, delimiter=",", fmt="%.17g")


def potential_upsilon(alpha: float, y: np.ndarray) -> np.ndarray:
    """2*alpha/(1 + sqrt(1-alpha)*y): twice the time potential at beta=inf."""
    return 2.0 * alpha / (1.0 + math.sqrt(1.0 - alpha) * y)


def assemble_linearized(kind: OperatorKind, grid: Discretization, alpha: float,
                        beta: float | None = None) -> OperatorMatrix:
    """Dense 2(N+1) x 2(N+1) collocation matrix of the requested operator.

    L2_ALPHA_BETA takes its potentials from the closed-form profiles, so
    any admissible (integer alpha, beta > 0) pair is accepted; the others
    require alpha in (0,1].
    """
    y, D = grid.nodes, grid.D
    M = grid.size
    A = np.zeros((2 * M, 2 * M))
    yD = y[:, None] * D
    A[:M, :M] = -yD
    A[:M, M:] = np.eye(M)
    D2 = grid.dmatrix(2)
    if kind is OperatorKind.FREE_WAVE:
        A[:M, 0] -= 1.0            # -q1(-1) on every first-block row
        A[M:, :M] = D2
        A[M:, M:] = -np.eye(M) - yD
        return OperatorMatrix(kind, alpha, None, A, grid)
    if kind is OperatorKind.L_ALPHA:
        if not (0.0 < alpha <= 1.0):
            raise ValueError("L_alpha requires alpha in (0,1]")
        A[M:, :M] = D2
        A[M:, M:] = -np.eye(M) - yD + np.diag(potential_upsilon(alpha, y))
        return OperatorMatrix(kind, alpha, None, A, grid)
    if kind is OperatorKind.L_PRIME_ALPHA:
        if not (0.0 < alpha <= 1.0):
            raise ValueError("L'_alpha requires alpha in (0,1]")
        g = math.sqrt(1.0 - alpha)
        A[M:, :M] = D2 - 2.0 * g * D
        A[M:, M:] = np.eye(M) - yD
        return OperatorMatrix(kind, alpha, None, A, grid)
    if beta is None or not (beta > 0):
        raise ValueError("L2 operator requires beta > 0")
    vt = np.empty(M)
    vs = np.empty(M)
    for i, yi in enumerate(y):
        _, _, vti, vsi = profile_eval(EquationKind.NULL_FORM, alpha,
                                      BetaBranch.finite(beta), float(yi))
        vt[i], vs[i] = vti, vsi
    A[M:, :M] = D2 - 2.0 * (vs[:, None] * D)
    A[M:, M:] = -np.eye(M) - yD + np.diag(2.0 * vt)
    return OperatorMatrix(kind, alpha, beta, A, grid)


def commutator_shifted(kind: OperatorKind, grid: Discretization, alpha: float,
                       k: int) -> np.ndarray:
    """The order-k shifted operator L_{alpha,k} from the derivative commutator.

    d^k L_alpha = L_{alpha,k} d^k + (remainder acting on lower derivatives
    of q2 only); the shift shows up as -k on both diagonal blocks.
    """
    if kind is not OperatorKind.L_ALPHA:
        raise ValueError("shifted form implemented for L_alpha only")
    y, D = grid.nodes, grid.D
    M = grid.size
    A = np.zeros((2 * M, 2 * M))
    yD = y[:, None] * D
    A[:M, :M] = -float(k) * np.eye(M) - yD
    A[:M, M:] = np.eye(M)
    A[M:, :M] = grid.dmatrix(2)
    A[M:, M:] = (-1.0 - float(k)) * np.eye(M) - yD + np.diag(potential_upsilon(alpha, y))
    return A


class GramFlavor(Enum):
    PAIR_HK = "pair_hk"    # H^{k+1} x H^k with the (Hdot^m + L^2) representative
    TRIPLE_K = "triple_k"  # boundary term |q1(-1)|^2 + Hdot^1 x L^2 (+ top seminorms)


@dataclass(frozen=True)
class GramForm:
    """Positive semidefinite form represented by a factor S with G = S^T S.

    The factored form is what makes high-k norms computable in double
    precision; the dense entries are only materialized on demand.
    """

    flavor: GramFlavor
    k: int
    factor: np.ndarray
    grid: Discretization

    @property
    def entries(self) -> np.ndarray:
        return self.factor.T @ self.factor

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.vdot(self.factor @ np.asarray(f), self.factor @ np.asarray(g)))

    def norm(self, f: np.ndarray) -> float:
        return float(np.linalg.norm(self.factor @ np.asarray(f)))

    def opnorm(self, B: np.ndarray, rtol: float = 1e-10,
               test_modes: int | None = None) -> float:
        """Operator norm of B in this geometry.

        With test_modes set, the supremum runs over inputs spanned by the
        first test_modes Chebyshev modes per component -- a mesh-independent
        smooth test space, which is the only way to get resolution-stable
        values out of high-k geometries in double precision.  Otherwise a
        truncated SVD of the factor excludes directions below
        rtol*sigma_max.
        """
        if test_modes is not None:
            # max of ||B q||_G / ||q||_G over a fixed family of smooth probe
            # states (Chebyshev modes per component plus mixed pairs).  A
            # true sup over their span is not float64-computable here: unit
            # G-ball directions differ by ~14 orders of magnitude in
            # amplitude for k = 5, so any orthonormalization mixes noise
            # into the small-amplitude directions.  The probe maximum is a
            # mesh-stable lower-bound estimate.
            m = min(test_modes, self.grid.N + 1)
            M = self.grid.size
            j = np.arange(m)
            V = np.cos(np.pi * np.outer(self.grid.N - np.arange(self.grid.N + 1),
                                        j) / self.grid.N)
            probes = []
            zero = np.zeros(M)
            for i in range(m):
                probes.append(np.concatenate([V[:, i], zero]))
                probes.append(np.concatenate([zero, V[:, i]]))
            for i in range(m - 1):
                probes.append(np.concatenate([V[:, i], V[:, i + 1]]))
            best = 0.0
            for q in probes:
                nq = np.linalg.norm(self.factor @ q)
                if nq == 0.0:
                    continue
                best = max(best, float(np.linalg.norm(self.factor @ (B @ q))) / nq)
            return best
        U, sig, Vt = np.linalg.svd(self.factor, full_matrices=False)
        r = int(np.sum(sig >= rtol * sig[0]))
        return float(np.linalg.svd(self.factor @ B @ (Vt[:r].conj().T / sig[:r]),
                                   compute_uv=False)[0])


def sobolev_gram(grid: Discretization, k: int, flavor: GramFlavor) -> GramForm:
    """Assemble the requested Gram form from quadrature and powers of D."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > grid.N // 4:
        raise ValueError(f"k={k} exceeds the derivative accuracy budget for N={grid.N}")
    M = grid.size
    sw = np.sqrt(grid.weights)
    Z = np.zeros((M, M))
    SW = np.diag(sw)

    def wd(j):
        return sw[:, None] * grid.dmatrix(j)

    if flavor is GramFlavor.PAIR_HK:
        rows = [np.hstack([wd(k + 1), Z]), np.hstack([SW, Z]), np.hstack([Z, SW])]
        if k >= 1:
            rows.insert(2, np.hstack([Z, wd(k)]))
        S = np.vstack(rows)
        return GramForm(flavor, k, S, grid)

    bnd = np.zeros((1, 2 * M))
    bnd[0, 0] = 1.0                      # q1 at the y=-1 node
    rows = [bnd, np.hstack([wd(1), Z]), np.hstack([Z, SW])]
    if k >= 1:
        rows.append(np.hstack([wd(k + 1), Z]))
        rows.append(np.hstack([Z, wd(k)]))
    S = np.vstack(rows)
    return GramForm(flavor, k, S, grid)


def rayleigh_dissipativity(op: OperatorMatrix, gram: GramForm, q: np.ndarray) -> float:
    """Re <op q, q>_gram / <q, q>_gram for a nonzero state q."""
    q = np.asarray(q)
    den = gram.inner(q, q).real
    if den <= 0.0 or not np.isfinite(den):
        raise ValueError("state has zero (or unresolved) gram norm")
    return gram.inner(op.entries @ q, q).real / den
