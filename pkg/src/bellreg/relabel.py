"""Relabelings of parties, settings, and outcomes.

A relabeling acts on behaviors by permuting the (x, y, a, b) index set; the
full relabeling group of a Bell scenario is generated by party exchange,
per-party input permutations, and per-input output permutations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Behavior, Scenario

__all__ = ["Relabeling", "relabel", "relabeling_matrix", "relabeling_group"]


def _check_perm(perm: tuple[int, ...], n: int, what: str) -> None:
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{what} must be a permutation of range({n}), got {perm}")


@dataclass(frozen=True)
class Relabeling:
    """Permutation descriptor.

    The relabeled behavior is defined by

        Q(a, b | x, y) = P(out_a[x][a], out_b[y][b] | in_a[x], in_b[y])

    with the output permutations indexed by the *new* input labels.  When
    ``swap_parties`` is set, the roles of (a, x) and (b, y) on the right-hand
    side are exchanged first; this requires a symmetric scenario.
    """

    scenario: Scenario
    in_a: tuple[int, ...] = field(default=())
    in_b: tuple[int, ...] = field(default=())
    out_a: tuple[tuple[int, ...], ...] = field(default=())
    out_b: tuple[tuple[int, ...], ...] = field(default=())
    swap_parties: bool = False

    def __post_init__(self) -> None:
        s = self.scenario
        in_a = self.in_a or tuple(range(s.inputs_a))
        in_b = self.in_b or tuple(range(s.inputs_b))
        out_a = self.out_a or tuple(tuple(range(s.outputs_a)) for _ in range(s.inputs_a))
        out_b = self.out_b or tuple(tuple(range(s.outputs_b)) for _ in range(s.inputs_b))
        _check_perm(in_a, s.inputs_a, "in_a")
        _check_perm(in_b, s.inputs_b, "in_b")
        if len(out_a) != s.inputs_a or len(out_b) != s.inputs_b:
            raise ValueError("need one output permutation per input")
        for p in out_a:
            _check_perm(tuple(p), s.outputs_a, "out_a entry")
        for p in out_b:
            _check_perm(tuple(p), s.outputs_b, "out_b entry")
        if self.swap_parties and (s.inputs_a, s.outputs_a) != (s.inputs_b, s.outputs_b):
            raise ValueError("party swap needs a symmetric scenario")
        object.__setattr__(self, "in_a", tuple(in_a))
        object.__setattr__(self, "in_b", tuple(in_b))
        object.__setattr__(self, "out_a", tuple(tuple(p) for p in out_a))
        object.__setattr__(self, "out_b", tuple(tuple(p) for p in out_b))

    def source_index(self, x: int, y: int, a: int, b: int) -> tuple[int, int, int, int]:
        """Index of the original entry that lands at (x, y, a, b)."""
        xa, yb = self.in_a[x], self.in_b[y]
        aa, bb = self.out_a[x][a], self.out_b[y][b]
        if self.swap_parties:
            return yb, xa, bb, aa
        return xa, yb, aa, bb

    def permutation(self) -> np.ndarray:
        """Array ``src`` with Q.p[i] = P.p[src[i]]."""
        s = self.scenario
        src = np.empty(s.dim, dtype=np.intp)
        for x, y in s.settings():
            for a in range(s.outputs_a):
                for b in range(s.outputs_b):
                    xs, ys, as_, bs = self.source_index(x, y, a, b)
                    src[s.index(x, y, a, b)] = s.index(xs, ys, as_, bs)
        return src

    def inverse(self) -> "_RawRelabeling":
        """Relabeling that undoes this one (as a raw index permutation)."""
        return _RawRelabeling(self.scenario, np.argsort(self.permutation()))


@dataclass(frozen=True)
class _RawRelabeling:
    """Relabeling given directly by its index permutation."""

    scenario: Scenario
    src: np.ndarray

    def permutation(self) -> np.ndarray:
        return self.src


def relabel(P: Behavior, r: Relabeling | _RawRelabeling) -> Behavior:
    """Apply a relabeling; preserves normalization and physicality."""
    if r.scenario != P.scenario:
        raise ValueError("relabeling and behavior scenarios differ")
    return Behavior(P.scenario, P.p[r.permutation()], physical=P.physical, atol=P.atol)


def relabeling_matrix(r: Relabeling | _RawRelabeling) -> np.ndarray:
    """Permutation matrix M with relabel(P).p = M @ P.p."""
    src = r.permutation()
    n = src.size
    M = np.zeros((n, n))
    M[np.arange(n), src] = 1.0
    return M


def relabeling_group(scenario: Scenario) -> list[Relabeling]:
    """Every element of the relabeling group of the scenario.

    For the 2x2x2 scenario this has 128 elements; the enumeration cost grows
    quickly, so keep this to small scenarios.
    """
    s = scenario
    in_perms_a = list(itertools.permutations(range(s.inputs_a)))
    in_perms_b = list(itertools.permutations(range(s.inputs_b)))
    out_perms_a = list(itertools.product(itertools.permutations(range(s.outputs_a)), repeat=s.inputs_a))
    out_perms_b = list(itertools.product(itertools.permutations(range(s.outputs_b)), repeat=s.inputs_b))
    swaps = [False, True] if (s.inputs_a, s.outputs_a) == (s.inputs_b, s.outputs_b) else [False]
    group = []
    for swap in swaps:
        for ia in in_perms_a:
            for ib in in_perms_b:
                for oa in out_perms_a:
                    for ob in out_perms_b:
                        group.append(Relabeling(s, ia, ib, oa, ob, swap))
    return group
