"""Pure-pixel search by random projection (PPI step) and vertex component analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DimensionError, InvalidParameterError

REDRAW_TOL = 1e-8
MAX_REDRAWS = 100


@dataclass(frozen=True)
class VcaResult:
    indices: list
    endmembers: np.ndarray
    projections_used: int
    # |<y, r>| gap between the chosen pixel and the runner-up, per round
    projection_gaps: list = field(default_factory=list)


def ppi_select(Y, r, exclude=()) -> int:
    """Index of the pixel with the largest ``|<y_t, r>|``; ties go to the lowest index.

    Columns listed in ``exclude`` are skipped.
    """
    Y = np.asarray(Y, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.shape != (Y.shape[0],):
        raise DimensionError(f"direction has shape {r.shape}, expected ({Y.shape[0]},)")
    if not np.any(r):
        raise InvalidParameterError("projection direction must be nonzero")
    scores = np.abs(r @ Y)
    if len(exclude):
        scores[list(exclude)] = -np.inf
    t = int(np.argmax(scores))
    if scores[t] == -np.inf:
        raise DegenerateDataError("no candidate pixels left")
    return t


def orthogonal_direction(identified, rng: np.random.Generator) -> np.ndarray:
    """Unit Gaussian direction projected onto the orthogonal complement of ``identified``."""
    identified = np.asarray(identified, dtype=float)
    if identified.ndim == 1:
        identified = identified[:, None]
    M, k = identified.shape
    if k >= M:
        raise DimensionError(f"{k} columns in R^{M} leave no orthogonal complement")
    if k:
        Q, _ = np.linalg.qr(identified)
    for _ in range(MAX_REDRAWS):
        r = rng.standard_normal(M)
        if k:
            r -= Q @ (Q.T @ r)
        norm = np.linalg.norm(r)
        if norm >= REDRAW_TOL:
            return r / norm
    raise DegenerateDataError("could not draw a direction outside the identified span")


def vca(Y, n_endmembers: int, rng: np.random.Generator) -> VcaResult:
    """Select ``n_endmembers`` pure-pixel candidates with N projection rounds.

    Round ``k`` projects onto a random direction orthogonal to the ``k``
    pixels already chosen and takes the extreme pixel among the rest.
    """
    Y = np.asarray(Y, dtype=float)
    M, T = Y.shape
    N = int(n_endmembers)
    if not 1 <= N <= min(M, T):
        raise DimensionError(f"need 1 <= N <= min(M, T), got N={N} for a {M}x{T} image")
    indices = []
    gaps = []
    for _ in range(N):
        r = orthogonal_direction(Y[:, indices], rng)
        t = ppi_select(Y, r, exclude=indices)
        scores = np.abs(r @ Y)
        scores[indices + [t]] = -np.inf
        runner_up = scores.max() if T > len(indices) + 1 else 0.0
        gaps.append(float(abs(r @ Y[:, t]) - runner_up))
        indices.append(t)
    return VcaResult(indices, Y[:, indices].copy(), N, gaps)
