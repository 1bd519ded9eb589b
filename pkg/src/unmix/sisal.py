"""Soft-constrained minimum-volume simplex fitting in inverse-mixing coordinates.

The problem solved is::

    min_B  -log|det B| + lam * h(B Y)   s.t.  B^T 1 = q,  q = (Y^T)^+ 1

with ``h`` the elementwise hinge. Each outer iteration majorizes the
log-determinant by a quadratic around the current iterate and solves the
resulting convex problem with ADMM on the splitting ``Z = B Y``; the step
towards that solution is then chosen by a grid line search on the true
objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidParameterError, SingularMatrixError, StepFailureError
from .geometry import equality_vector
from .vca import vca

DET_GUARD = 1e-300
CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True)
class SisalConfig:
    lam: float = 1.0
    mu: Union[float, str] = "auto"
    admm_rho: float = 1.0
    outer_iters: int = 80
    admm_iters: int = 200
    tol: float = 1e-8
    admm_tol: float = 1e-6
    step_grid: Sequence[float] = (1.0, 0.5, 0.25, 0.125, 0.0625)

    def __post_init__(self):
        object.__setattr__(self, "step_grid", tuple(float(a) for a in self.step_grid))
        if self.lam <= 0 or self.admm_rho <= 0 or self.tol <= 0 or self.admm_tol <= 0:
            raise InvalidParameterError("lam, admm_rho, tol and admm_tol must be positive")
        if self.outer_iters < 1 or self.admm_iters < 1:
            raise InvalidParameterError("iteration caps must be positive")
        if self.mu != "auto" and not (isinstance(self.mu, (int, float)) and self.mu > 0):
            raise InvalidParameterError("mu must be positive or 'auto'")
        if not self.step_grid or any(not 0 < a <= 1 for a in self.step_grid):
            raise InvalidParameterError("step_grid values must lie in (0, 1]")

    def resolve_mu(self, Y) -> float:
        if self.mu == "auto":
            return float(np.sum(Y**2) / Y.shape[1])
        return float(self.mu)

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "mu": self.mu,
            "admm_rho": self.admm_rho,
            "outer_iters": self.outer_iters,
            "admm_iters": self.admm_iters,
            "tol": self.tol,
            "admm_tol": self.admm_tol,
            "step_grid": list(self.step_grid),
        }


@dataclass
class SisalState:
    B: np.ndarray
    q: np.ndarray
    objective_trace: list = field(default_factory=list)
    constraint_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    iterations: int = 0
    stalled: bool = False

    @property
    def endmembers(self) -> np.ndarray:
        """Reduced-coordinate endmembers ``A = B^{-1}``."""
        return np.linalg.inv(self.B)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.B))


def hinge(X) -> float:
    """Sum of the magnitudes of the negative entries."""
    X = np.asarray(X, dtype=float)
    return float(np.sum(np.maximum(-X, 0.0)))


def neg_logdet(B) -> float:
    sign, logabs = np.linalg.slogdet(np.asarray(B, dtype=float))
    if sign == 0 or logabs < math.log(DET_GUARD):
        raise SingularMatrixError("|det B| is below the singularity guard")
    return -float(logabs)


def grad_neg_logdet(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    neg_logdet(B)
    return -np.linalg.inv(B).T


def objective(B, Y, lam: float) -> float:
    """``-log|det B| + lam * h(B Y)``; ``inf`` for singular ``B``."""
    try:
        f = neg_logdet(B)
    except SingularMatrixError:
        return math.inf
    return f + lam * hinge(np.asarray(B) @ Y)


def prox_hinge(v, c):
    """Proximal map of ``c * max(-z, 0)``, elementwise."""
    v = np.asarray(v, dtype=float)
    return np.where(v > 0, v, np.where(v >= -c, 0.0, v + c))


def project_to_constraint(B, q) -> np.ndarray:
    """Frobenius-nearest matrix with ``B^T 1 = q``."""
    B = np.asarray(B, dtype=float)
    return B + np.outer(np.ones(B.shape[0]), (q - B.sum(axis=0)) / B.shape[0])


def _subproblem_value(B, B_k, G, mu, Y, lam):
    D = B - B_k
    return float(np.sum(G * D) + mu * np.sum(D * D) + lam * hinge(B @ Y))


class _BUpdate:
    """Equality-constrained quadratic solve shared by all ADMM iterations.

    Minimizes ``<G, B> + mu ||B - B_k||^2 + rho/2 ||B Y - W||^2`` subject to
    ``B^T 1 = q``. With ``H = 2 mu I + rho Y Y^T`` the solution is
    ``B = (R - 1 nu^T) H^{-1}``, ``nu = (R^T 1 - H q) / N``.
    """

    def __init__(self, Y, mu, rho, q):
        N = Y.shape[0]
        self.Y = Y
        self.rho = rho
        self.q = q
        self.H = 2.0 * mu * np.eye(N) + rho * (Y @ Y.T)
        try:
            self.factor = cho_factor(self.H)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("cannot factor the ADMM normal matrix") from exc
        self.Hq = self.H @ q

    def solve(self, R):
        N = R.shape[0]
        nu = (R.sum(axis=0) - self.Hq) / N
        return cho_solve(self.factor, (R - np.outer(np.ones(N), nu)).T).T


def solve_subproblem(B_k, Y, lam, mu, q, rho=1.0, iters=200, tol=1e-6, return_info=False):
    """Approximately minimize the quadratic majorizer plus hinge penalty.

    ADMM on ``Z = B Y`` with scaled dual ``U``. The result satisfies the
    equality constraint to solver precision and never has a larger
    subproblem value than the projection of ``B_k`` (falls back to it otherwise).
    """
    B_k = np.asarray(B_k, dtype=float)
    if mu <= 0:
        raise InvalidParameterError("mu must be positive")
    G = grad_neg_logdet(B_k)
    solver = _BUpdate(Y, mu, rho, q)
    base = 2.0 * mu * B_k - G
    Z = B_k @ Y
    U = np.zeros_like(Z)
    B = B_k
    it = 0
    for it in range(1, iters + 1):
        B = solver.solve(base + rho * (Z - U) @ Y.T)
        BY = B @ Y
        Z_old = Z
        Z = prox_hinge(BY + U, lam / rho)
        U += BY - Z
        primal = np.linalg.norm(BY - Z)
        dual = rho * np.linalg.norm((Z - Z_old) @ Y.T)
        scale = max(1.0, np.linalg.norm(BY), np.linalg.norm(Z))
        if primal <= tol * scale and dual <= tol * max(1.0, rho * np.linalg.norm(U @ Y.T)):
            break
    # the fallback must itself be feasible, so compare against the projected B_k
    B_ref = project_to_constraint(B_k, q)
    value = _subproblem_value(B, B_k, G, mu, Y, lam)
    reference = _subproblem_value(B_ref, B_k, G, mu, Y, lam)
    fell_back = value > reference + 1e-9 * max(1.0, abs(reference))
    if fell_back:
        B = B_ref
    if return_info:
        return B, {"iterations": it, "fell_back": fell_back}
    return B


def simplex_around_data(Y, rng=None, spread=3.0) -> np.ndarray:
    """Fallback reduced endmembers: a regular simplex around the data mean.

    Vertices are the mean plus ``spread`` standard deviations along the top
    N-1 principal directions of the centred data.
    """
    N, T = Y.shape
    m = Y.mean(axis=1, keepdims=True)
    U, s, _ = np.linalg.svd(Y - m, full_matrices=False)
    P = U[:, : N - 1] * (s[: N - 1] / math.sqrt(T))
    # regular simplex vertices centred at the origin, unit radius, in R^{N-1}
    E = np.eye(N) - 1.0 / N
    V = np.linalg.svd(E)[0][:, : N - 1].T @ E
    V /= np.linalg.norm(V[:, 0])
    return m + spread * P @ V


def initial_inverse(Y, q, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Initial ``B``: inverse of VCA endmembers, or of a simplex around the data."""
    rng = np.random.default_rng(0) if rng is None else rng
    N = Y.shape[0]
    A = vca(Y, N, rng).endmembers
    if np.linalg.cond(A) > 1e12:
        A = simplex_around_data(Y)
    return project_to_constraint(np.linalg.inv(A), q)


def sisal(Y, config: SisalConfig = SisalConfig(), B_init=None, rng=None) -> SisalState:
    """Run the outer majorize-and-line-search loop on reduced data ``Y`` (N x T)."""
    Y = np.asarray(Y, dtype=float)
    N, T = Y.shape
    q = equality_vector(Y)
    if B_init is None:
        B = initial_inverse(Y, q, rng)
    else:
        B = np.asarray(B_init, dtype=float)
        if B.shape != (N, N):
            raise InvalidParameterError(f"B_init must be {N}x{N}")
        if np.max(np.abs(B.sum(axis=0) - q)) > 1e-6:
            B = project_to_constraint(B, q)
    lam = config.lam
    mu = config.resolve_mu(Y)
    current = objective(B, Y, lam)
    if not math.isfinite(current):
        raise StepFailureError("initial B is singular", {"B": B})
    state = SisalState(B=B, q=q)
    state.objective_trace.append(current)
    state.constraint_trace.append(float(np.max(np.abs(B.sum(axis=0) - q))))

    for k in range(config.outer_iters):
        cand = solve_subproblem(B, Y, lam, mu, q, config.admm_rho, config.admm_iters, config.admm_tol)
        step = cand - B
        best_alpha, best_value, best_B = 0.0, current, B
        finite = 0
        for alpha in config.step_grid:
            trial = B + alpha * step
            value = objective(trial, Y, lam)
            if math.isfinite(value):
                finite += 1
            if value < best_value:
                best_alpha, best_value, best_B = alpha, value, trial
        if finite == 0:
            raise StepFailureError(
                "every candidate step is singular",
                {"iteration": k, "objective": current, "step_norm": float(np.linalg.norm(step))},
            )
        state.iterations = k + 1
        improvement = current - best_value
        if best_alpha == 0.0:
            state.stalled = True
            break
        B, current = best_B, best_value
        state.B = B
        state.objective_trace.append(current)
        state.constraint_trace.append(float(np.max(np.abs(B.sum(axis=0) - q))))
        state.step_trace.append(best_alpha)
        if improvement <= config.tol * max(1.0, abs(current)):
            break
    return state
