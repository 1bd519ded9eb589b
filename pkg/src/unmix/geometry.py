"""Simplex and affine geometry used by the estimators.

Covers both volume functionals, SVD-based dimensionality reduction, the
pseudo-inverse equality vector used by the inverse-mixing constraint, and
numerical checks of the identities linking ``det(A^T A)`` to the true
simplex volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError, RankDeficientError

RANK_TOL = 1e-10
IDENTITY_TOL = 1e-8


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EndmemberSet:
    """Columns ``a_1..a_N`` of an M x N endmember matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(_as_matrix(self.matrix)))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n_endmembers(self) -> int:
        return self.matrix.shape[1]

    def edges(self) -> np.ndarray:
        return edge_matrix(self.matrix)

    def is_affinely_independent(self) -> bool:
        return svol(self.matrix) > 0.0


@dataclass(frozen=True)
class AffineReduction:
    basis: np.ndarray
    reduced_data: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", _readonly(self.basis))
        object.__setattr__(self, "reduced_data", _readonly(self.reduced_data))
        object.__setattr__(self, "singular_values", _readonly(self.singular_values))

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class SimplexFrames:
    F: np.ndarray
    G: np.ndarray


def _matrix(E) -> np.ndarray:
    return E.matrix if isinstance(E, EndmemberSet) else _as_matrix(E)


def edge_matrix(A) -> np.ndarray:
    """``[a_1 - a_N, ..., a_{N-1} - a_N]``."""
    A = _matrix(A)
    return A[:, :-1] - A[:, -1:]


def simplex_frames(n: int) -> SimplexFrames:
    """``F = [I, -1]^T`` (N x N-1) and ``G = [F, 1/N]`` (N x N)."""
    if n < 2:
        raise DimensionError("frames need N >= 2")
    F = np.vstack([np.eye(n - 1), -np.ones((1, n - 1))])
    G = np.hstack([F, np.full((n, 1), 1.0 / n)])
    return SimplexFrames(_readonly(F), _readonly(G))


def svol(E) -> float:
    """Volume of the (N-1)-simplex spanned by the columns, ``sqrt(det(Abar^T Abar)) / (N-1)!``.

    Computed as the product of the singular values of the edge matrix; an
    affinely dependent set returns exactly 0.
    """
    A = _matrix(E)
    n = A.shape[1]
    if n < 2:
        raise DimensionError("svol needs at least two vertices")
    Abar = edge_matrix(A)
    if Abar.shape[0] < Abar.shape[1]:
        return 0.0
    sv = np.linalg.svd(Abar, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_TOL * sv[0]:
        return 0.0
    return float(np.exp(np.sum(np.log(sv)) - math.lgamma(n)))


def gram_volume(E) -> float:
    """``|det(A)|`` for a square endmember matrix."""
    A = _matrix(E)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"gram_volume needs a square matrix, got {A.shape}")
    return float(abs(np.linalg.det(A)))


def reduce(Y, n_components: int) -> AffineReduction:
    """Project ``Y`` onto its top ``n_components`` left singular vectors.

    Basis vectors are sign-normalized so that each reduced coordinate has a
    nonnegative sum over pixels; this keeps the output deterministic.
    """
    if hasattr(Y, "data") and not isinstance(Y, np.ndarray):
        Y = Y.data
    Y = _as_matrix(Y)
    M, T = Y.shape
    if not 1 <= n_components <= min(M, T):
        raise DimensionError(f"cannot reduce a {M}x{T} matrix to {n_components} components")
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    if s[0] == 0.0 or s[n_components - 1] < RANK_TOL * s[0]:
        raise RankDeficientError(f"data rank is below {n_components}")
    basis = U[:, :n_components].copy()
    reduced = basis.T @ Y
    flip = reduced.sum(axis=1) < 0
    basis[:, flip] *= -1
    reduced[flip] *= -1
    return AffineReduction(basis, reduced, s)


def lift(red: AffineReduction, A_reduced) -> EndmemberSet:
    A_reduced = _matrix(A_reduced)
    if A_reduced.shape[0] != red.basis.shape[1]:
        raise DimensionError(
            f"reduced endmembers have {A_reduced.shape[0]} rows, basis has {red.basis.shape[1]} columns"
        )
    return EndmemberSet(red.basis @ A_reduced)


def pinv(X, rtol: float = RANK_TOL) -> np.ndarray:
    """SVD pseudo-inverse with a relative singular-value cutoff."""
    X = _as_matrix(X)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def equality_vector(Y_reduced) -> np.ndarray:
    """Minimum-norm solution ``q = (Y^T)^+ 1`` of ``Y^T q = 1``."""
    Y = _as_matrix(Y_reduced)
    N, T = Y.shape
    s = np.linalg.svd(Y, compute_uv=False)
    if T < N or s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
        raise RankDeficientError("reduced data is not full row rank")
    return pinv(Y.T) @ np.ones(T)


def constrained_min_norm(A0):
    """Solve ``min ||A0 x||^2 s.t. 1^T x = 1`` through its KKT system.

    Returns ``(x, value)``.
    """
    A0 = _as_matrix(A0)
    n = A0.shape[1]
    sv = np.linalg.svd(A0, compute_uv=False)
    if A0.shape[0] < n or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficientError("A0 must have full column rank")
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = 2.0 * A0.T @ A0
    K[:n, n] = 1.0
    K[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    x = np.linalg.solve(K, rhs)[:n]
    return x, float(np.sum((A0 @ x) ** 2))


def min_affine_norm(A0) -> float:
    """``C = min_{x^T 1 = 1} ||A0 x||^2``."""
    return constrained_min_norm(A0)[1]


def _span_residual(W, P) -> float:
    """Largest relative residual of the columns of ``P`` after projection onto span(W)."""
    P = np.atleast_2d(np.asarray(P, dtype=float).T).T
    Q, _ = np.linalg.qr(W)
    rank = np.linalg.matrix_rank(W)
    Q = Q[:, :rank]
    R = P - Q @ (Q.T @ P)
    scale = max(1.0, float(np.max(np.linalg.norm(P, axis=0))))
    return float(np.max(np.linalg.norm(R, axis=0)) / scale)


def affine_residual(A0, P) -> float:
    """Largest Euclidean distance from the columns of ``P`` to aff(A0).

    Points of the hull are parameterized as ``A0 (1/N + V z)`` with ``V`` an
    orthonormal basis of the sum-zero vectors, so the affine constraint holds
    exactly and the fit is an ordinary least-squares problem in ``z``.
    """
    A0 = _as_matrix(A0)
    P = np.asarray(P, dtype=float).reshape(A0.shape[0], -1)
    n = A0.shape[1]
    centre = A0.mean(axis=1, keepdims=True)
    if n == 1:
        return float(np.max(np.linalg.norm(P - centre, axis=0)))
    W = A0 @ orthonormal_complement_of_ones(n)
    z, *_ = np.linalg.lstsq(W, P - centre, rcond=None)
    return float(np.max(np.linalg.norm(W @ z + centre - P, axis=0)))


def _log_gram_det(X) -> float:
    """``log det(X^T X)`` from the R factor of a QR decomposition.

    Forming ``X^T X`` squares the condition number; on ill-conditioned but
    valid inputs that alone costs several digits of the determinant.
    """
    R = np.linalg.qr(X, mode="r")
    d = np.abs(np.diag(R))
    if np.any(d == 0):
        raise RankDeficientError("Gram matrix is singular")
    return float(2.0 * np.sum(np.log(d)))


def verify_gram_ratio(A, A0) -> float:
    """Relative residual of ``det(A^T A) = C det(Abar^T Abar)``.

    ``A`` must share its affine hull with ``A0``; ``C`` is
    ``min_affine_norm(A0)``.
    """
    A = _matrix(A)
    A0 = _matrix(A0)
    if A.shape != A0.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {A0.shape}")
    tol = IDENTITY_TOL * float(np.linalg.norm(A))
    if max(affine_residual(A0, A), affine_residual(A, A0)) > tol:
        raise PreconditionError("aff(A) and aff(A0) differ")
    C = min_affine_norm(A0)
    log_lhs = _log_gram_det(A)
    log_rhs = math.log(C) + _log_gram_det(edge_matrix(A))
    # |lhs - rhs| / lhs without forming either Gram matrix
    return float(abs(math.expm1(log_rhs - log_lhs)))


def lemma1_checks(A0, U, d, rng=None, n_points: int = 20, tol: float = IDENTITY_TOL):
    """Sampled-point checks of three subspace facts for a semi-orthogonal ``U``.

    (a) ``aff(A0) = span(Abar0) + d``, (b) ``span(Abar0) = span(A0 U)``,
    (c) ``{x : x^T 1 = 1} = span(U) + 1/N``. Each equality is checked in both
    directions on random points; returns a triple of booleans.
    """
    A0 = _as_matrix(A0)
    U = _as_matrix(U)
    d = np.asarray(d, dtype=float).reshape(-1)
    M, N = A0.shape
    if U.shape != (N, N - 1):
        raise PreconditionError(f"U must be {N}x{N - 1}, got {U.shape}")
    if np.max(np.abs(U.T @ U - np.eye(N - 1))) > 1e-10:
        raise PreconditionError("U is not semi-orthogonal")
    if np.max(np.abs(U.T @ np.ones(N))) > 1e-10:
        raise PreconditionError("U^T 1 must vanish")
    scale = max(1.0, float(np.linalg.norm(A0)))
    if affine_residual(A0, d[:, None]) > tol * scale:
        raise PreconditionError("d is not in aff(A0)")
    rng = np.random.default_rng(0) if rng is None else rng
    one = np.ones(N)
    Abar0 = edge_matrix(A0)

    # points of aff(A0) and of span(Abar0) + d
    X = rng.standard_normal((N, n_points))
    X += (1.0 - X.sum(axis=0)) / N
    aff_pts = A0 @ X
    shifted = Abar0 @ rng.standard_normal((N - 1, n_points)) + d[:, None]
    a = max(
        _span_residual(Abar0, aff_pts - d[:, None]),
        affine_residual(A0, shifted) / max(scale, float(np.max(np.linalg.norm(shifted, axis=0)))),
    ) < tol

    A0U = A0 @ U
    b = max(_span_residual(A0U, Abar0), _span_residual(Abar0, A0U)) < tol

    Z = rng.standard_normal((N, n_points))
    Z += (1.0 - Z.sum(axis=0)) / N
    hyper_from_u = U @ rng.standard_normal((N - 1, n_points)) + one[:, None] / N
    c = max(
        _span_residual(U, Z - one[:, None] / N),
        float(np.max(np.abs(hyper_from_u.sum(axis=0) - 1.0))),
    ) < tol
    return bool(a), bool(b), bool(c)


def orthonormal_complement_of_ones(n: int) -> np.ndarray:
    """An N x (N-1) semi-orthogonal matrix with ``U^T 1 = 0``."""
    Q, _ = np.linalg.qr(np.hstack([np.ones((n, 1)), np.eye(n)[:, : n - 1]]))
    return Q[:, 1:n]
