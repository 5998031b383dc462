"""Local-level moment-matrix relaxations of the quantum set.

Level ell uses, per party, all products of at most ell projectors (one
retained projector per binary setting, the other outcome eliminated by
normalization).  The moment matrix is indexed by (Alice word) x (Bob word)
pairs, so its rows and columns carry a tensor structure; partial
transposition over the Bob factor is a permutation of entries, which is what
the negativity program exploits.  Level 1 is the almost-quantum set.

Entries whose operator words coincide after the reductions (idempotence,
adjoint reversal combined with transposition) share one scalar variable; the
matrix is a linear image chi(z) of the class vector z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..core import Behavior, Scenario

__all__ = ["MomentStructure", "build_moment_structure", "party_words", "reduce_word"]

Word = tuple[int, ...]


def reduce_word(w: Word) -> Word:
    """Collapse adjacent equal projectors (idempotence)."""
    out: list[int] = []
    for sym in w:
        if out and out[-1] == sym:
            continue
        out.append(sym)
    return tuple(out)


def word_mul(a: Word, b: Word) -> Word:
    return reduce_word(a + b)


def word_adj(a: Word) -> Word:
    return tuple(reversed(a))


def party_words(n_inputs: int, level: int) -> list[Word]:
    """Canonically ordered monomial basis of one party up to degree ``level``."""
    words: list[Word] = [()]
    words += [(x,) for x in range(n_inputs)]
    if level >= 2:
        words += [(x, y) for x in range(n_inputs) for y in range(n_inputs) if x != y]
    return words


@dataclass
class MomentStructure:
    scenario: Scenario
    level: int
    alice_words: list[Word]
    bob_words: list[Word]
    side: int
    entry_class: np.ndarray
    class_reps: list[tuple[Word, Word]]
    identity_class: int
    behavior_map: sp.csc_matrix
    svec_map: sp.csc_matrix = field(repr=False)
    tb_perm: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.class_reps)

    @property
    def svec_dim(self) -> int:
        return self.side * (self.side + 1) // 2

    def chi(self, z: np.ndarray) -> np.ndarray:
        """Dense moment matrix at class values z."""
        return z[self.entry_class]

    def behavior_from_classes(self, z: np.ndarray) -> Behavior:
        return Behavior.from_array(self.scenario, self.behavior_map @ z)

    _class_index: dict = field(default_factory=dict, repr=False)

    def class_of(self, wa: Word, wb: Word) -> int:
        key = min((wa, wb), (word_adj(wa), word_adj(wb)))
        return self._class_index[key]


def _svec_slot(side: int):
    """Map (r, c) with r <= c to its svec position, plus the scale vector."""
    slot = np.zeros((side, side), dtype=np.intp)
    k = 0
    for r in range(side):
        for c in range(r, side):
            slot[r, c] = slot[c, r] = k
            k += 1
    return slot


@lru_cache(maxsize=16)
def build_moment_structure(scenario: Scenario, level: int) -> MomentStructure:
    """Moment structure for a bipartite binary-outcome scenario, ell in {1,2}."""
    if level not in (1, 2):
        raise ValueError("supported relaxation levels: 1, 2")
    if scenario.outputs_a != 2 or scenario.outputs_b != 2:
        raise ValueError("moment matrices are implemented for binary outcomes only")
    if scenario.inputs_a > 4 or scenario.inputs_b > 4:
        raise ValueError("moment matrices support at most 4 inputs per party")

    alice = party_words(scenario.inputs_a, level)
    bob = party_words(scenario.inputs_b, level)
    na, nb = len(alice), len(bob)
    side = na * nb

    class_index: dict[tuple[Word, Word], int] = {}
    class_reps: list[tuple[Word, Word]] = []
    entry_class = np.empty((side, side), dtype=np.intp)
    for i in range(na):
        for k in range(nb):
            r = i * nb + k
            for j in range(na):
                for l in range(nb):
                    c = j * nb + l
                    wa = word_mul(word_adj(alice[i]), alice[j])
                    wb = word_mul(word_adj(bob[k]), bob[l])
                    key = min((wa, wb), (word_adj(wa), word_adj(wb)))
                    cid = class_index.get(key)
                    if cid is None:
                        cid = len(class_reps)
                        class_index[key] = cid
                        class_reps.append(key)
                    entry_class[r, c] = cid

    identity_class = class_index[((), ())]

    # behavior map: every P(a,b|x,y) is an affine combination of classes,
    # with the identity class standing in for the constant 1
    rows, cols, vals = [], [], []

    def add(ridx: int, wa: Word, wb: Word, coef: float) -> None:
        key = min((wa, wb), (word_adj(wa), word_adj(wb)))
        rows.append(ridx)
        cols.append(class_index[key])
        vals.append(coef)

    for x, y, a, b in scenario.events():
        ridx = scenario.index(x, y, a, b)
        # P(a,b|x,y) expanded over {1, A_x, B_y, A_x B_y}
        if a == 0 and b == 0:
            add(ridx, (x,), (y,), 1.0)
        elif a == 0 and b == 1:
            add(ridx, (x,), (), 1.0)
            add(ridx, (x,), (y,), -1.0)
        elif a == 1 and b == 0:
            add(ridx, (), (y,), 1.0)
            add(ridx, (x,), (y,), -1.0)
        else:
            add(ridx, (), (), 1.0)
            add(ridx, (x,), (), -1.0)
            add(ridx, (), (y,), -1.0)
            add(ridx, (x,), (y,), 1.0)
    behavior_map = sp.coo_matrix(
        (vals, (rows, cols)), shape=(scenario.dim, len(class_reps))
    ).tocsc()

    # svec map: svec(chi(z)) = svec_map @ z with sqrt(2)-scaled off-diagonals
    slot = _svec_slot(side)
    srows, scols, svals = [], [], []
    sq2 = np.sqrt(2.0)
    for r in range(side):
        for c in range(r, side):
            srows.append(slot[r, c])
            scols.append(entry_class[r, c])
            svals.append(1.0 if r == c else sq2)
    svec_map = sp.coo_matrix(
        (svals, (srows, scols)), shape=(side * (side + 1) // 2, len(class_reps))
    ).tocsc()

    # partial transpose over the Bob index factor, as an svec permutation
    tb = np.empty(side * (side + 1) // 2, dtype=np.intp)
    for i in range(na):
        for k in range(nb):
            r = i * nb + k
            for j in range(na):
                for l in range(nb):
                    c = j * nb + l
                    if r > c:
                        continue
                    tb[slot[r, c]] = slot[i * nb + l, j * nb + k]
    ms = MomentStructure(
        scenario,
        level,
        alice,
        bob,
        side,
        entry_class,
        class_reps,
        identity_class,
        behavior_map,
        svec_map,
        tb,
    )
    ms._class_index = class_index
    return ms
