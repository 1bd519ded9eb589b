"""JSON run reports with a strict parser."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import InvalidParameterError


def _trace_summary(trace) -> dict:
    if not trace:
        return {"first": None, "last": None, "length": 0}
    return {"first": float(trace[0]), "last": float(trace[-1]), "length": len(trace)}


def _finite_or_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


@dataclass
class RunReport:
    algorithm: str
    algorithm_config: dict
    seed: int
    n_endmembers: int
    scene: Optional[dict] = None
    wall_time_ms: Optional[float] = None
    match: Optional[dict] = None
    trace_kind: str = "none"
    trace_summary: dict = field(default_factory=lambda: _trace_summary([]))
    trace: list = field(default_factory=list)
    stalled: bool = False
    iterations: int = 0

    @classmethod
    def from_result(cls, result, seed, scene=None, match=None, wall_time_ms=None):
        trace = [_finite_or_none(v) for v in result.trace]
        return cls(
            algorithm=result.algorithm,
            algorithm_config=result.config,
            seed=int(seed),
            n_endmembers=int(result.endmembers.shape[1]),
            scene=scene,
            wall_time_ms=wall_time_ms,
            match=None if match is None else match.to_dict(),
            trace_kind=result.trace_kind,
            trace_summary=_trace_summary(trace),
            trace=trace,
            stalled=bool(result.stalled),
            iterations=int(result.iterations),
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "RunReport":
        names = {f.name for f in fields(cls)}
        required = {"algorithm", "algorithm_config", "seed", "n_endmembers"}
        missing = required - data.keys()
        if missing:
            raise InvalidParameterError(f"report is missing keys {sorted(missing)}")
        unknown = set(data) - names
        if unknown and strict:
            raise InvalidParameterError(f"report has unknown keys {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def from_json(cls, text: str, strict: bool = True) -> "RunReport":
        return cls.from_dict(json.loads(text), strict=strict)
