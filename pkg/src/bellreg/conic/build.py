"""Incremental assembly of standard-form cone programs."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .cones import ConeBlock, ConeSpec
from .problem import ConicProblem

__all__ = ["ProblemBuilder"]


class ProblemBuilder:
    """Collects variables, constraint rows, and cone blocks.

    Rows are appended in call order; each helper adds one cone block
    covering the rows it emits.  ``s = b - A x`` must land in the block's
    cone, so callers pass the affine expression that should equal s.
    """

    def __init__(self) -> None:
        self.n = 0
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []  # (cols, vals) per row
        self._b: list[float] = []
        self._blocks: list[ConeBlock] = []

    def new_vars(self, k: int) -> np.ndarray:
        idx = np.arange(self.n, self.n + k)
        self.n += k
        return idx

    @property
    def n_rows(self) -> int:
        return len(self._b)

    def _append_rows(self, A_rows, b_vals) -> None:
        for cols, vals in A_rows:
            self._rows.append((np.asarray(cols, dtype=np.intp), np.asarray(vals, dtype=float)))
        self._b.extend(float(v) for v in b_vals)

    def eq(self, A_rows, b_vals) -> None:
        """Zero-cone rows: A x = b."""
        b_vals = list(b_vals)
        self._append_rows(A_rows, b_vals)
        self._blocks.append(ConeBlock("zero", len(b_vals)))

    def nonneg(self, A_rows, b_vals) -> None:
        """Rows with b - A x >= 0."""
        b_vals = list(b_vals)
        self._append_rows(A_rows, b_vals)
        self._blocks.append(ConeBlock("nonneg", len(b_vals)))

    def soc(self, A_rows, b_vals) -> None:
        b_vals = list(b_vals)
        self._append_rows(A_rows, b_vals)
        self._blocks.append(ConeBlock("soc", len(b_vals)))

    def psd(self, side: int, A_rows, b_vals) -> None:
        b_vals = list(b_vals)
        self._append_rows(A_rows, b_vals)
        self._blocks.append(ConeBlock("psd", side))

    def exp_triples(self, count: int, A_rows, b_vals) -> None:
        b_vals = list(b_vals)
        self._append_rows(A_rows, b_vals)
        self._blocks.append(ConeBlock("exp", count))

    def sparse_rows(self, M: sp.spmatrix, var_idx: np.ndarray, negate: bool = False):
        """Yield (cols, vals) rows mapping ``M @ x[var_idx]`` into A rows."""
        Mc = sp.csr_matrix(M)
        sign = -1.0 if negate else 1.0
        for i in range(Mc.shape[0]):
            sl = slice(Mc.indptr[i], Mc.indptr[i + 1])
            yield var_idx[Mc.indices[sl]], sign * Mc.data[sl]

    def build(self, c: np.ndarray) -> ConicProblem:
        c = np.asarray(c, dtype=float)
        if c.size != self.n:
            raise ValueError(f"objective has {c.size} entries for {self.n} variables")
        m = len(self._b)
        counts = np.fromiter((r[0].size for r in self._rows), dtype=np.intp, count=m)
        rows = np.repeat(np.arange(m), counts)
        cols = np.concatenate([r[0] for r in self._rows]) if m else np.empty(0, dtype=np.intp)
        vals = np.concatenate([r[1] for r in self._rows]) if m else np.empty(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, self.n)).tocsc()
        return ConicProblem(c, A, np.asarray(self._b), ConeSpec(tuple(self._blocks)))
