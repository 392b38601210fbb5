"""Iteration reports shared by the dense and TT-based CP solvers."""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional


class Termination(str, enum.Enum):
    TOLERANCE = "tolerance"
    MAX_ITERATIONS = "max_iterations"
    EXACT = "exact"
    CLOSED_FORM = "closed_form"


@dataclass
class FitReport:
    """Cost trace and termination info of an iterative fit.

    ``cost_trace[0]`` is the cost of the initial model; every later entry is
    the cost after one half-sweep (TT fit) or one full sweep (dense ALS).
    """

    cost_trace: List[float] = field(default_factory=list)
    sweeps: int = 0
    termination: Termination = Termination.MAX_ITERATIONS
    final_rel_error: Optional[float] = None
    ridge_used: bool = False
    init: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["termination"] = Termination(self.termination).value
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        d = dict(d)
        d["termination"] = Termination(d["termination"])
        return cls(**d)
