"""Standard-form cone programs and their solutions.

min c.x  subject to  A x + s = b,  s in K,

with K a product of the supported cone blocks.  Problems can be dumped to
and loaded from a sparse-triplet JSON format for debugging.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import ConeSpec

__all__ = ["ConicProblem", "ConicSolution"]


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: ConeSpec

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = sp.csc_matrix(self.A).astype(float)
        if A.shape != (b.size, c.size):
            raise ValueError(f"A has shape {A.shape}, expected ({b.size}, {c.size})")
        if self.cones.dim != b.size:
            raise ValueError(f"cones have dimension {self.cones.dim}, b has {b.size}")
        c.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dump_json(self, path: str) -> None:
        coo = self.A.tocoo()
        doc = {
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "A": {
                "shape": list(self.A.shape),
                "rows": coo.row.tolist(),
                "cols": coo.col.tolist(),
                "vals": coo.data.tolist(),
            },
            "cones": self.cones.to_json(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load_json(cls, path: str) -> "ConicProblem":
        with open(path) as fh:
            doc = json.load(fh)
        a = doc["A"]
        A = sp.coo_matrix(
            (a["vals"], (a["rows"], a["cols"])), shape=tuple(a["shape"])
        ).tocsc()
        return cls(
            np.asarray(doc["c"], dtype=float),
            A,
            np.asarray(doc["b"], dtype=float),
            ConeSpec.from_json(doc["cones"]),
        )


@dataclass
class ConicSolution:
    """Primal/dual solution with status and residuals.

    status: optimal | primal_infeasible | dual_infeasible | max_iters |
    numerical.  For infeasible statuses, x or y carries the (normalized)
    Farkas certificate.
    """

    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def summary(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "gap": self.gap,
            "iterations": self.iterations,
        }
