"""End-to-end estimation: reduce, run one estimator, lift back to band space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .deca import DecaConfig, deca
from .errors import InvalidParameterError
from .geometry import reduce, lift
from .sisal import SisalConfig, sisal
from .vca import vca

ALGORITHMS = ("vca", "sisal", "deca")


@dataclass
class UnmixResult:
    endmembers: np.ndarray
    algorithm: str
    config: dict
    trace: list = field(default_factory=list)
    trace_kind: str = "none"
    stalled: bool = False
    iterations: int = 0


def unmix(Y, n_endmembers: int, algorithm: str, seed: int = 0, sisal_config=None,
          deca_config=None, k: int = 1) -> UnmixResult:
    """Estimate an ``M x N`` endmember matrix from ``Y`` (M x T).

    All randomness comes from ``np.random.default_rng(seed)``, so the result
    is a pure function of the arguments.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidParameterError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    N = int(n_endmembers)
    if N < 2:
        raise InvalidParameterError("need at least two endmembers")
    Y = np.asarray(Y, dtype=float)
    rng = np.random.default_rng(seed)
    red = reduce(Y, N)

    if algorithm == "vca":
        res = vca(red.reduced_data, N, rng)
        # pure pixels are original columns, so take them from the input directly
        return UnmixResult(Y[:, res.indices].copy(), "vca", {"indices": list(res.indices)},
                           iterations=res.projections_used)

    if algorithm == "sisal":
        cfg = sisal_config or SisalConfig()
        state = sisal(red.reduced_data, cfg, rng=rng)
        A = lift(red, state.endmembers).matrix
        return UnmixResult(np.array(A), "sisal", cfg.to_dict(), list(state.objective_trace),
                           "objective", state.stalled, state.iterations)

    cfg = deca_config or DecaConfig()
    state = deca(red.reduced_data, N, K=k, config=cfg, rng=rng)
    A = lift(red, state.endmembers).matrix
    conf = dict(cfg.to_dict(), k=int(k))
    return UnmixResult(np.array(A), "deca", conf, list(state.loglik_trace),
                       "loglik", state.stalled, state.iterations)
