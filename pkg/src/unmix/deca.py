"""Dirichlet-mixture maximum-likelihood unmixing.

Abundances follow a mixture of Dirichlet densities. In the noiseless model
``s = B y`` with ``B = A^{-1}``, so the per-pixel log-likelihood is
``log|det B| + log p(B y)``; this module fits the prior by EM and ``B`` by
monotone projected gradient ascent, alternating the two.

It also evaluates the noisy-model likelihood for the uniform prior, where
``log p(y) = -log svol(A) + r(A, y)`` and ``r`` is the log Gaussian mass of
the simplex around ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import nnls
from scipy.special import digamma, gammaln, log_ndtr, logsumexp, polygamma

from .errors import DimensionError, InvalidParameterError, SingularMatrixError
from .geometry import equality_vector, svol
from .sisal import DET_GUARD, initial_inverse

CLIP = 1e-9
SUM_TOL = 1e-9
MAX_HALVINGS = 50
ACTIVE_TOL = 1e-8
# a component holding about one pixel has a likelihood unbounded in alpha
ALPHA_MAX = 1e8


@dataclass(frozen=True)
class DirichletMixture:
    weights: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        a = np.array(self.alphas, dtype=float)
        if a.ndim == 1:
            a = a[None, :]
        if a.shape[0] != w.size:
            raise DimensionError(f"{w.size} weights for {a.shape[0]} components")
        if np.any(~(w > 0)) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must be positive and sum to one")
        if np.any(~(a > 0)):
            raise InvalidParameterError("concentrations must be positive")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alphas", a)

    @classmethod
    def uniform(cls, n: int) -> "DirichletMixture":
        return cls(np.ones(1), np.ones((1, n)))

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.alphas.shape[1]

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "alphas": self.alphas.tolist()}


@dataclass(frozen=True)
class DecaConfig:
    outer_iters: int = 50
    em_iters: int = 20
    ascent_steps: int = 20
    backtrack: float = 0.5
    max_backtracks: int = 30
    tol: float = 1e-9
    uniform_prior: bool = False
    margin: float = 1e-6

    def __post_init__(self):
        if min(self.outer_iters, self.em_iters, self.ascent_steps, self.max_backtracks) < 1:
            raise InvalidParameterError("iteration counts must be positive")
        if not 0 < self.backtrack < 1:
            raise InvalidParameterError("backtrack factor must lie in (0, 1)")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DecaState:
    B: np.ndarray
    prior: DirichletMixture
    loglik_trace: list = field(default_factory=list)
    iterations: int = 0
    stalled: bool = False

    @property
    def endmembers(self) -> np.ndarray:
        return np.linalg.inv(self.B)


# --------------------------------------------------------------------------
# densities

def _log_norm(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return gammaln(alpha.sum(axis=-1)) - gammaln(alpha).sum(axis=-1)


def _log_kernel(S, alpha):
    """``sum_i (alpha_i - 1) log s_i`` per column; zero entries follow the support rules."""
    a1 = (np.asarray(alpha, dtype=float) - 1.0)[:, None]
    pos = S > 0
    with np.errstate(divide="ignore"):
        logs = np.log(np.where(pos, S, 1.0))
    out = np.sum(a1 * logs, axis=0)
    zero_bad = np.any(~pos & (a1 != 0), axis=0)
    return np.where(zero_bad | np.any(S < 0, axis=0), -np.inf, out)


def dirichlet_logpdf(s, alpha):
    """Log Dirichlet density w.r.t. the coordinate measure ``ds_1 .. ds_{N-1}``.

    Accepts one N-vector or an N x T matrix of columns. Points off the simplex,
    and boundary points where the density is not finite, give ``-inf``.
    """
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    if alpha.ndim != 1 or np.any(~(alpha > 0)):
        raise InvalidParameterError("alpha must be a positive vector")
    if s.shape[0] != alpha.size or s.ndim > 2:
        raise DimensionError(f"s has shape {s.shape}, alpha has length {alpha.size}")
    S = s.reshape(alpha.size, -1)
    out = _log_norm(alpha) + _log_kernel(S, alpha)
    out = np.where(np.abs(S.sum(axis=0) - 1.0) > SUM_TOL, -np.inf, out)
    return float(out[0]) if s.ndim == 1 else out


def _component_logpdf(S, prior: DirichletMixture, check_sum=True):
    """K x T matrix of ``log gamma_k + log D(s_t; alpha_k)``."""
    L = np.log(prior.weights)[:, None] + _log_norm(prior.alphas)[:, None]
    L = L + np.stack([_log_kernel(S, a) for a in prior.alphas])
    if check_sum:
        L[:, np.abs(S.sum(axis=0) - 1.0) > SUM_TOL] = -np.inf
    return L


def mixture_logpdf(s, prior: DirichletMixture):
    """``log sum_k gamma_k D(s; alpha_k)`` by max-shifted summation."""
    s = np.asarray(s, dtype=float)
    if s.shape[0] != prior.dim or s.ndim > 2:
        raise DimensionError(f"s has shape {s.shape}, prior has dimension {prior.dim}")
    L = _component_logpdf(s.reshape(prior.dim, -1), prior)
    with np.errstate(invalid="ignore"):
        out = logsumexp(L, axis=0)
    return float(out[0]) if s.ndim == 1 else out


# --------------------------------------------------------------------------
# EM for the prior

def clip_abundances(S, eps=CLIP):
    S = np.maximum(np.asarray(S, dtype=float), eps)
    return S / S.sum(axis=0, keepdims=True)


def _weighted_dirichlet_value(alpha, W, b):
    return W * _log_norm(alpha) + float(np.dot(alpha - 1.0, b))


def fit_dirichlet_weighted(logS, r, alpha0, newton_iters=50):
    """Maximize ``sum_t r_t log D(s_t; alpha)`` by damped Newton from ``alpha0``.

    The Hessian is diagonal plus rank one, so each step is closed form.
    Steps are halved until ``alpha`` stays in ``(0, ALPHA_MAX]`` and the
    objective does not decrease; after ``MAX_HALVINGS`` the previous
    ``alpha`` is kept.
    """
    W = float(np.sum(r))
    alpha = np.array(alpha0, dtype=float)
    # a component with (numerically) no responsibility has no data to fit;
    # its Hessian terms would underflow to zero
    if W <= 1e-12:
        return alpha
    b = logS @ r
    value = _weighted_dirichlet_value(alpha, W, b)
    for _ in range(newton_iters):
        a0 = alpha.sum()
        g = W * (digamma(a0) - digamma(alpha)) + b
        d = -W * polygamma(1, alpha)
        c = W * float(polygamma(1, a0))
        hinv_g = g / d - (np.sum(g / d) / (1.0 / c + np.sum(1.0 / d))) / d
        step = -hinv_g
        t = 1.0
        for _ in range(MAX_HALVINGS):
            trial = alpha + t * step
            if np.all(trial > 0) and np.all(trial <= ALPHA_MAX):
                trial_value = _weighted_dirichlet_value(trial, W, b)
                if trial_value >= value:
                    break
            t *= 0.5
        else:
            break
        moved = np.max(np.abs(trial - alpha) / alpha)
        alpha, value = trial, trial_value
        if moved < 1e-10:
            break
    return alpha


def _moment_alpha(S, r):
    """Method-of-moments Dirichlet estimate from weighted columns."""
    W = max(float(np.sum(r)), 1e-300)
    m = S @ r / W
    v = ((S - m[:, None]) ** 2) @ r / W
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = np.median(m * (1 - m) / np.maximum(v, 1e-300)) - 1.0
    if not np.isfinite(prec) or prec <= 0:
        prec = 1.0
    return np.clip(m * prec, 1e-3, ALPHA_MAX)


def _kmeanspp_labels(S, K, rng):
    T = S.shape[1]
    centres = [S[:, rng.integers(T)]]
    d2 = np.sum((S - centres[0][:, None]) ** 2, axis=0)
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(T) if total <= 0 else rng.choice(T, p=d2 / total)
        centres.append(S[:, idx])
        d2 = np.minimum(d2, np.sum((S - centres[-1][:, None]) ** 2, axis=0))
    C = np.stack(centres, axis=1)
    dist = np.sum(S**2, axis=0)[None, :] - 2 * C.T @ S + np.sum(C**2, axis=0)[:, None]
    return np.argmin(dist, axis=0)


def _mixture_loglik(S, prior):
    return float(np.mean(logsumexp(_component_logpdf(S, prior, check_sum=False), axis=0)))


def em_fit_mixture(S, K: int, iters: int = 100, rng=None, init: Optional[DirichletMixture] = None,
                   tol: float = 1e-8):
    """Fit a K-component Dirichlet mixture to abundance columns by EM.

    Returns ``(mixture, loglik_trace)`` where the trace holds the mean
    per-pixel log-likelihood after initialization and after every iteration.
    """
    if K < 1:
        raise InvalidParameterError("K must be at least 1")
    rng = np.random.default_rng(0) if rng is None else rng
    S = clip_abundances(S)
    N, T = S.shape
    logS = np.log(S)

    if init is None:
        labels = _kmeanspp_labels(S, K, rng) if K > 1 else np.zeros(T, dtype=int)
        R = np.zeros((K, T))
        R[labels, np.arange(T)] = 1.0
        R += 1e-3
        R /= R.sum(axis=0, keepdims=True)
        alphas = np.stack([fit_dirichlet_weighted(logS, R[k], _moment_alpha(S, R[k])) for k in range(K)])
        weights = R.mean(axis=1)
        prior = DirichletMixture(weights / weights.sum(), alphas)
    else:
        if init.n_components != K or init.dim != N:
            raise DimensionError("initial mixture does not match K and N")
        prior = init

    trace = [_mixture_loglik(S, prior)]
    for _ in range(iters):
        L = _component_logpdf(S, prior, check_sum=False)
        R = np.exp(L - logsumexp(L, axis=0, keepdims=True))
        weights = np.maximum(R.mean(axis=1), 1e-300)
        weights /= weights.sum()
        alphas = np.stack([
            fit_dirichlet_weighted(logS, R[k], prior.alphas[k]) for k in range(K)
        ])
        candidate = DirichletMixture(weights, alphas)
        value = _mixture_loglik(S, candidate)
        if value < trace[-1]:
            break
        prior = candidate
        trace.append(value)
        if abs(trace[-1] - trace[-2]) <= tol * max(1.0, abs(trace[-1])):
            break
    return prior, trace


# --------------------------------------------------------------------------
# noiseless likelihood in B

def _logabsdet(B):
    sign, logabs = np.linalg.slogdet(B)
    if sign == 0 or logabs < math.log(DET_GUARD):
        return None
    return float(logabs)


def _clipped(S, clip):
    if np.any(S < -clip):
        return None, None
    inside = S > clip
    return np.where(inside, S, clip), inside


def loglik_noiseless(B, Y, prior: DirichletMixture, clip: float = CLIP) -> float:
    """Mean per-pixel log-likelihood ``log|det B| + mean_t log p(B y_t)``.

    Entries of ``B Y`` within ``clip`` of zero are clipped to ``clip``; any
    entry below ``-clip`` puts the pixel outside the support and gives ``-inf``.
    The value is a likelihood only on ``B^T 1 = q``, where every column of
    ``B Y`` sums to one; elsewhere it is the smooth extension used for
    gradients, and the ascent never leaves that set.
    """
    B = np.asarray(B, dtype=float)
    logdet = _logabsdet(B)
    if logdet is None:
        return -math.inf
    S, _ = _clipped(B @ Y, clip)
    if S is None:
        return -math.inf
    L = _component_logpdf(S, prior, check_sum=False)
    with np.errstate(invalid="ignore"):
        return logdet + float(np.mean(logsumexp(L, axis=0)))


def grad_loglik_noiseless(B, Y, prior: DirichletMixture, clip: float = CLIP) -> np.ndarray:
    """Gradient of :func:`loglik_noiseless` w.r.t. ``B`` (clipped entries are constant)."""
    B = np.asarray(B, dtype=float)
    if _logabsdet(B) is None:
        raise SingularMatrixError("B is singular")
    S, inside = _clipped(B @ Y, clip)
    if S is None:
        raise InvalidParameterError("some pixels lie outside the support")
    L = _component_logpdf(S, prior, check_sum=False)
    R = np.exp(L - logsumexp(L, axis=0, keepdims=True))
    coeff = (prior.alphas - 1.0).T @ R
    W = np.where(inside, coeff / S, 0.0)
    return np.linalg.inv(B).T + W @ Y.T / Y.shape[1]


def _enclosing(B, Y, margin):
    """Shrink ``B`` towards the vertex centroid until every pixel is strictly inside.

    Equivalent to inflating the simplex ``B^{-1}`` about its centroid; the
    column sums of ``B`` are unchanged.
    """
    S = B @ Y
    sums = S.sum(axis=0)
    N = B.shape[0]
    c = sums / N
    need = (c[None, :] - S) / np.maximum(c[None, :] - margin * sums[None, :], 1e-300)
    kappa = max(1.0, float(np.max(np.where(S < margin * sums, need, 1.0)))) * (1.0 + 1e-6)
    if kappa <= 1.0 + 1e-6 and np.all(S > 0):
        return B
    Ginv = (np.eye(N) - (1.0 - kappa) / N * np.ones((N, N))) / kappa
    return Ginv @ B


def _feasible_direction(G, B, Y, active_tol):
    """Project the constrained gradient onto the directions that keep boundary pixels inside.

    Directions satisfy ``D^T 1 = 0``. For every active pair ``(i, t)`` with
    ``(B Y)_{it}`` at the boundary the direction must not decrease
    ``(D Y)_{it}``. The projection onto that cone is ``g + C lam`` with
    ``lam = argmin_{lam >= 0} ||g + C lam||`` (Moreau decomposition).
    """
    N = B.shape[0]
    P = np.eye(N) - 1.0 / N
    g = P @ G
    rows, cols = np.nonzero(B @ Y <= active_tol)
    if rows.size == 0:
        return g
    C = np.empty((N * N, rows.size))
    for j, (i, t) in enumerate(zip(rows, cols)):
        C[:, j] = np.outer(P[:, i], Y[:, t]).ravel()
    lam, _ = nnls(C, -g.ravel())
    return g + (C @ lam).reshape(N, N)


def _max_feasible_step(B, D, Y, active_tol):
    S = B @ Y
    V = D @ Y
    moving = (V < 0) & (S > active_tol)
    if not moving.any():
        return math.inf
    return float(np.min(S[moving] / -V[moving]))


def deca(Y, n_endmembers: int, K: int = 1, config: DecaConfig = DecaConfig(), rng=None,
         B_init=None) -> DecaState:
    """Alternate EM on the prior and monotone ascent on ``B`` (reduced data ``Y``, N x T)."""
    Y = np.asarray(Y, dtype=float)
    N, T = Y.shape
    if N != n_endmembers:
        raise DimensionError(f"reduced data has {N} rows, expected {n_endmembers}")
    rng = np.random.default_rng(0) if rng is None else rng
    q = equality_vector(Y)
    B = initial_inverse(Y, q, rng) if B_init is None else np.asarray(B_init, dtype=float)
    B = _enclosing(B, Y, config.margin)

    if config.uniform_prior:
        prior = DirichletMixture.uniform(N)
    else:
        prior, _ = em_fit_mixture(B @ Y, K, config.em_iters, rng)
    current = loglik_noiseless(B, Y, prior)
    state = DecaState(B=B, prior=prior, loglik_trace=[current])
    step = None

    for it in range(config.outer_iters):
        start = current
        if not config.uniform_prior:
            cand_prior, _ = em_fit_mixture(B @ Y, K, config.em_iters, rng, init=prior)
            value = loglik_noiseless(B, Y, cand_prior)
            if value >= current:
                prior, current = cand_prior, value

        for _ in range(config.ascent_steps):
            G = grad_loglik_noiseless(B, Y, prior)
            D = _feasible_direction(G, B, Y, ACTIVE_TOL)
            dnorm = np.linalg.norm(D)
            if dnorm <= 1e-12 * max(1.0, np.linalg.norm(G)):
                break
            if step is None:
                step = 0.1 * np.linalg.norm(B) / dnorm
            t_max = _max_feasible_step(B, D, Y, ACTIVE_TOL)
            accepted = False
            for _ in range(config.max_backtracks):
                trial = B + min(step, t_max) * D
                value = loglik_noiseless(trial, Y, prior)
                if value > current:
                    B, current, accepted = trial, value, True
                    step *= 2.0
                    break
                step *= config.backtrack
            if not accepted:
                state.stalled = True
                step = None
                break

        state.B, state.prior = B, prior
        state.loglik_trace.append(current)
        state.iterations = it + 1
        if state.stalled or current - start <= config.tol * max(1.0, abs(current)):
            break
    return state


# --------------------------------------------------------------------------
# noisy-model terms for the uniform prior (M = N - 1)

def _log_diff_cdf(a, b):
    """``log(Phi(b) - Phi(a))`` for ``a <= b``, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    l_hi = log_ndtr(hi)
    l_lo = log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = l_hi + np.log1p(-np.exp(l_lo - l_hi))
    return np.where(hi <= lo, -np.inf, out)


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_nodes(lo, hi, width, windows, fine_nodes=20, coarse_panels=8):
    """Composite Gauss-Legendre nodes on ``[lo, hi]`` refined inside ``windows``."""
    x_ref, w_ref = _gauss_legendre(fine_nodes)
    edges = {lo, hi}
    for c, half in windows:
        a, b = max(lo, c - half), min(hi, c + half)
        if a < b:
            n = int(min(4000, math.ceil((b - a) / width)))
            edges.update(np.linspace(a, b, n + 1).tolist())
    edges = np.array(sorted(edges))
    coarse = []
    for a, b in zip(edges[:-1], edges[1:]):
        coarse.append(np.linspace(a, b, coarse_panels + 1) if (b - a) > 2 * width else np.array([a, b]))
    pts = np.unique(np.concatenate(coarse))
    a, b = pts[:-1], pts[1:]
    x = (a[:, None] + (b - a)[:, None] * x_ref[None, :]).ravel()
    w = ((b - a)[:, None] * w_ref[None, :]).ravel()
    return x, w


def _closest_point_triangle(P, y):
    """Closest point of the triangle with vertex columns ``P`` (2 x 3) to ``y``."""
    best, best_d = None, math.inf
    # interior candidate via barycentric coordinates
    T = np.vstack([P, np.ones(3)])
    lam = np.linalg.solve(T, np.append(y, 1.0))
    if np.all(lam >= 0):
        return np.array(y, dtype=float)
    for i, j in ((0, 1), (1, 2), (0, 2)):
        e = P[:, j] - P[:, i]
        t = np.clip(np.dot(y - P[:, i], e) / np.dot(e, e), 0.0, 1.0)
        p = P[:, i] + t * e
        d = np.linalg.norm(p - y)
        if d < best_d:
            best, best_d = p, d
    return best


def _r_segment(A, y, sigma):
    lo, hi = float(np.min(A)), float(np.max(A))
    y0 = float(np.ravel(y)[0])
    return float(_log_diff_cdf((lo - y0) / sigma, (hi - y0) / sigma))


def _r_triangle(A, y, sigma, n_nodes=64):
    """Outer composite Gauss-Legendre over one axis, exact Gaussian CDF over the other."""
    P = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).reshape(2)
    # rotate so that no edge is close to perpendicular to the outer axis
    best_R, best_slope = None, math.inf
    pairs = ((0, 1), (1, 2), (0, 2))
    for i, j in pairs:
        e = P[:, j] - P[:, i]
        for v in (e, np.array([-e[1], e[0]])):
            c, s = v / np.linalg.norm(v)
            R = np.array([[c, s], [-s, c]])
            Q = R @ P
            dx = np.array([Q[0, b] - Q[0, a] for a, b in pairs])
            dy = np.array([Q[1, b] - Q[1, a] for a, b in pairs])
            steep = np.abs(dx) > 1e-12 * np.abs(dy)
            worst = float(np.max(np.abs(dy[steep] / dx[steep]))) if steep.any() else math.inf
            if worst < best_slope:
                best_R, best_slope = R, worst
    Q = best_R @ P
    yr = best_R @ y
    order = np.argsort(Q[0])
    Q = Q[:, order]
    x0, x1, x2 = Q[0]
    if x2 - x0 <= 0:
        return -math.inf

    def line(a, b, x):
        if Q[0, b] == Q[0, a]:
            return np.full_like(x, min(Q[1, a], Q[1, b]))
        t = (x - Q[0, a]) / (Q[0, b] - Q[0, a])
        return Q[1, a] + t * (Q[1, b] - Q[1, a])

    p = best_R @ _closest_point_triangle(P, y)
    width = sigma / max(1.0, best_slope) / 2.0
    windows = [(yr[0], 40.0 * sigma), (p[0], 40.0 * sigma)]
    total = []
    for lo, hi, seg in ((x0, x1, 0), (x1, x2, 1)):
        if hi <= lo:
            continue
        xs, ws = _panel_nodes(lo, hi, width, windows, fine_nodes=20)
        if xs.size < n_nodes:
            xg, wg = _gauss_legendre(n_nodes)
            xs, ws = lo + (hi - lo) * xg, (hi - lo) * wg
        long_edge = line(0, 2, xs)
        short_edge = line(0, 1, xs) if seg == 0 else line(1, 2, xs)
        lower = np.minimum(long_edge, short_edge)
        upper = np.maximum(long_edge, short_edge)
        log_inner = _log_diff_cdf((lower - yr[1]) / sigma, (upper - yr[1]) / sigma)
        log_outer = -0.5 * ((xs - yr[0]) / sigma) ** 2 - math.log(math.sqrt(2 * math.pi) * sigma)
        total.append(np.log(ws) + log_outer + log_inner)
    return float(logsumexp(np.concatenate(total)))


def r_integral_mc(A, y, sigma, n_samples: int = 100_000, rng=None, n_strata: int = 100):
    """Stratified Monte-Carlo estimate of ``r``; returns ``(value, standard_error)``.

    ``standard_error`` is the delta-method error of the log estimate.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    d, N = A.shape
    rng = np.random.default_rng(0) if rng is None else rng
    per = max(1, n_samples // n_strata)
    # uniform points on the simplex from sorted uniforms, first uniform stratified
    U = rng.uniform(size=(n_strata * per, N - 1))
    U[:, 0] = (np.repeat(np.arange(n_strata), per) + U[:, 0]) / n_strata
    U.sort(axis=1)
    edges = np.hstack([np.zeros((U.shape[0], 1)), U, np.ones((U.shape[0], 1))])
    Sm = np.diff(edges, axis=1).T
    X = A @ Sm
    logphi = -0.5 * np.sum((X - y[:, None]) ** 2, axis=0) / sigma**2 - d * math.log(math.sqrt(2 * math.pi) * sigma)
    vol = svol(A)
    if vol == 0.0:
        return -math.inf, 0.0
    log_mean = logsumexp(logphi) - math.log(logphi.size)
    ratio = np.exp(logphi - log_mean)
    se = float(np.std(ratio, ddof=1) / math.sqrt(ratio.size))
    return float(min(0.0, math.log(vol) + log_mean)), se


def r_integral(A, y, sigma: float, mode: str = "auto", n_nodes: int = 64, n_samples: int = 100_000,
               rng=None) -> float:
    """``log`` of the Gaussian mass ``int phi_sigma(y - x) 1[x in conv A] dx`` over R^{N-1}.

    ``A`` is (N-1) x N. N = 2 uses the exact CDF difference, N = 3 a composite
    Gauss-Legendre rule with the inner integral in closed form, and larger N
    stratified Monte Carlo.
    """
    if not sigma > 0:
        raise InvalidParameterError("sigma must be positive")
    A = np.asarray(A, dtype=float)
    d, N = A.shape
    if d != N - 1:
        raise DimensionError(f"r_integral needs an (N-1) x N matrix, got {A.shape}")
    if mode == "auto":
        mode = "quadrature" if N <= 3 else "monte-carlo"
    if mode == "quadrature":
        if N == 2:
            return min(0.0, _r_segment(A, y, sigma))
        if N == 3:
            return min(0.0, _r_triangle(A, y, sigma, n_nodes))
        raise InvalidParameterError("quadrature mode supports N <= 3 only")
    if mode == "monte-carlo":
        return r_integral_mc(A, y, sigma, n_samples, rng)[0]
    raise InvalidParameterError(f"unknown mode {mode!r}")


def ml_objective(A, Y, sigma: float, **quad) -> float:
    """``log svol(A) - mean_t r(A, y_t)`` for data ``Y`` in (N-1)-dimensional coordinates."""
    A = np.asarray(A, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(A.shape[0], -1)
    vol = svol(A)
    if vol == 0.0:
        return math.inf
    r = np.array([r_integral(A, Y[:, t], sigma, **quad) for t in range(Y.shape[1])])
    return float(math.log(vol) - np.mean(r))


def log_marginal_quadrature(A, y, sigma: float, prior: Optional[DirichletMixture] = None,
                            n_nodes: int = 64) -> float:
    """``log p(y)`` of the noisy model by tensor Gauss-Legendre over the abundance simplex.

    Uses collapsed coordinates ``s_1 = u_1``, ``s_j = u_j prod_{i<j}(1 - u_i)``
    on the unit cube; the prior defaults to the uniform Dirichlet.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    d, N = A.shape
    prior = DirichletMixture.uniform(N) if prior is None else prior
    x, w = _gauss_legendre(n_nodes)
    grids = np.meshgrid(*([x] * (N - 1)), indexing="ij")
    wgrids = np.meshgrid(*([w] * (N - 1)), indexing="ij")
    U = np.stack([g.ravel() for g in grids])
    logw = np.sum(np.log(np.stack([g.ravel() for g in wgrids])), axis=0)
    S = np.empty((N, U.shape[1]))
    rest = np.ones(U.shape[1])
    log_jac = np.zeros(U.shape[1])
    for j in range(N - 1):
        S[j] = U[j] * rest
        if j < N - 2:
            log_jac += np.log(1.0 - U[j]) * (N - 2 - j)
        rest = rest * (1.0 - U[j])
    S[N - 1] = rest
    X = A @ S
    logphi = -0.5 * np.sum((X - y[:, None]) ** 2, axis=0) / sigma**2 - d * math.log(math.sqrt(2 * math.pi) * sigma)
    log_prior = logsumexp(_component_logpdf(S, prior, check_sum=False), axis=0)
    return float(logsumexp(logw + log_jac + logphi + log_prior))
