"""Synthetic linear-mixture scenes.

A scene is ``Y = A0 @ S0 + V`` where the columns of ``S0`` lie on the unit
simplex and ``V`` is i.i.d. Gaussian noise scaled to a requested SNR.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, PurityInfeasibleError

SIMPLEX_TOL = 1e-12
RANK_TOL = 1e-10
ENDMEMBER_RANK_TOL = 1e-6
MAX_ENDMEMBER_DRAWS = 100


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralImage:
    """Observed M x T matrix of pixel spectra (one pixel per column)."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or min(data.shape) < 1:
            raise InvalidParameterError(f"expected a non-empty 2-D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidParameterError("spectral image contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    mixing: np.ndarray
    abundances: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        A = _frozen(self.mixing)
        S = _frozen(self.abundances)
        if A.ndim != 2 or S.ndim != 2 or A.shape[1] != S.shape[0]:
            raise InvalidParameterError(f"incompatible shapes {A.shape} and {S.shape}")
        if self.noise_sigma < 0:
            raise InvalidParameterError("noise_sigma must be nonnegative")
        if np.any(S < 0) or np.any(np.abs(S.sum(axis=0) - 1.0) > SIMPLEX_TOL):
            raise InvalidParameterError("abundance columns must lie on the unit simplex")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise InvalidParameterError("mixing matrix is not full column rank")
        object.__setattr__(self, "mixing", A)
        object.__setattr__(self, "abundances", S)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))

    @property
    def n_endmembers(self) -> int:
        return self.mixing.shape[1]


@dataclass(frozen=True)
class SceneConfig:
    n_endmembers: int
    n_bands: int
    n_pixels: int
    snr_db: float = math.inf
    dirichlet_alpha: Optional[tuple] = None
    max_purity: float = 1.0
    include_pure_pixels: bool = False
    seed: int = 0
    endmembers: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    max_attempts: int = 1000

    def __post_init__(self):
        N, M, T = self.n_endmembers, self.n_bands, self.n_pixels
        if N < 1 or M < N or T < N:
            raise InvalidParameterError(f"need 1 <= N <= M and T >= N, got N={N}, M={M}, T={T}")
        alpha = self.dirichlet_alpha
        alpha = (1.0,) * N if alpha is None else tuple(float(a) for a in alpha)
        if len(alpha) != N or min(alpha) <= 0:
            raise InvalidParameterError("dirichlet_alpha must be a positive vector of length N")
        object.__setattr__(self, "dirichlet_alpha", alpha)
        if not (1.0 / N < self.max_purity <= 1.0) and not (N == 1 and self.max_purity == 1.0):
            raise InvalidParameterError(f"max_purity must lie in (1/N, 1], got {self.max_purity}")
        if not (self.snr_db == math.inf or math.isfinite(self.snr_db)):
            raise InvalidParameterError("snr_db must be finite or +inf")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must be an unsigned 64-bit integer")
        if self.max_attempts < 1:
            raise InvalidParameterError("max_attempts must be positive")
        if self.endmembers is not None:
            A = _frozen(self.endmembers)
            if A.shape != (M, N):
                raise InvalidParameterError(f"provided endmembers have shape {A.shape}, expected {(M, N)}")
            object.__setattr__(self, "endmembers", A)

    @property
    def endmember_source(self) -> str:
        return "random-uniform" if self.endmembers is None else "provided"

    def to_dict(self) -> dict:
        return {
            "n_endmembers": self.n_endmembers,
            "n_bands": self.n_bands,
            "n_pixels": self.n_pixels,
            "snr_db": None if self.snr_db == math.inf else float(self.snr_db),
            "dirichlet_alpha": list(self.dirichlet_alpha),
            "max_purity": float(self.max_purity),
            "include_pure_pixels": bool(self.include_pure_pixels),
            "seed": int(self.seed),
            "endmember_source": self.endmember_source,
            "max_attempts": int(self.max_attempts),
        }


def sample_dirichlet(alpha, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw from Dirichlet(alpha) by normalizing independent gamma variates.

    Returns an N-vector, or an N x size matrix when ``size`` is given.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size == 0 or np.any(~(alpha > 0)):
        raise InvalidParameterError("alpha must be a positive vector")
    n = 1 if size is None else size
    g = rng.standard_gamma(np.broadcast_to(alpha, (n, alpha.size)))
    # all-zero rows only occur for tiny alpha; put their mass on a random vertex
    bad = np.flatnonzero(g.sum(axis=1) <= 0)
    if bad.size:
        g[bad, rng.integers(alpha.size, size=bad.size)] = 1.0
    s = (g / g.sum(axis=1, keepdims=True)).T
    return s[:, 0] if size is None else s


def sigma_from_snr(signal, snr_db: float) -> float:
    """Noise standard deviation giving the requested per-entry SNR in dB."""
    if snr_db == math.inf:
        return 0.0
    if not math.isfinite(snr_db):
        raise InvalidParameterError("snr_db must be finite or +inf")
    signal = np.asarray(signal, dtype=float)
    power = float(np.sum(signal**2))
    if power == 0.0:
        raise InvalidParameterError("cannot scale noise to an all-zero signal")
    return math.sqrt(power / (signal.size * 10.0 ** (snr_db / 10.0)))


def random_endmembers(n_bands: int, n_endmembers: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform [0, 1] signatures, redrawn until comfortably full column rank."""
    for _ in range(MAX_ENDMEMBER_DRAWS):
        A = rng.uniform(0.0, 1.0, size=(n_bands, n_endmembers))
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] >= ENDMEMBER_RANK_TOL * sv[0]:
            return A
    raise InvalidParameterError("could not draw full-rank endmembers")


def _sample_abundances(config: SceneConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    S = sample_dirichlet(config.dirichlet_alpha, rng, size=n)
    if config.max_purity >= 1.0:
        return S
    pending = np.flatnonzero(S.max(axis=0) > config.max_purity)
    attempts = 1
    while pending.size:
        if attempts >= config.max_attempts:
            raise PurityInfeasibleError(
                f"{pending.size} pixels exceeded max_purity={config.max_purity} "
                f"after {config.max_attempts} attempts"
            )
        S[:, pending] = sample_dirichlet(config.dirichlet_alpha, rng, size=pending.size)
        pending = pending[S[:, pending].max(axis=0) > config.max_purity]
        attempts += 1
    return S


def generate_scene(config: SceneConfig, rng: Optional[np.random.Generator] = None):
    """Generate ``(SpectralImage, GroundTruth)`` for ``config``.

    The stream defaults to ``np.random.default_rng(config.seed)``. When pure
    pixels are requested they occupy N columns (before a random column
    permutation) and the purity cap applies to the remaining columns only.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    N, M, T = config.n_endmembers, config.n_bands, config.n_pixels

    if config.endmembers is None:
        A = random_endmembers(M, N, rng)
    else:
        A = np.array(config.endmembers)

    if config.include_pure_pixels:
        S = np.empty((N, T))
        S[:, :N] = np.eye(N)
        if T > N:
            S[:, N:] = _sample_abundances(config, T - N, rng)
        S = S[:, rng.permutation(T)]
    else:
        S = _sample_abundances(config, T, rng)
    # exact sum-to-one; the gamma ratio is already within a few ulps
    S /= S.sum(axis=0, keepdims=True)

    if np.linalg.matrix_rank(S, tol=RANK_TOL * np.linalg.norm(S, 2)) < N:
        warnings.warn("abundance matrix is not full row rank", RuntimeWarning, stacklevel=2)

    X = A @ S
    sigma = sigma_from_snr(X, config.snr_db)
    Y = X + sigma * rng.standard_normal(X.shape) if sigma > 0 else X
    return SpectralImage(Y), GroundTruth(A, S, sigma)
