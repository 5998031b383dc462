"""Orthogonal projection onto the nonsignaling affine space.

Two routes compute the same map: the explicit 16x16 matrix for the scenario
with binary inputs and outputs, and the general correlator-averaging
algorithm (averaged one-party marginals -> generalized correlators ->
reconstructed joint table).  The output may carry negative entries; that is
reported, never clamped.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Behavior, CHSH_SCENARIO, FrequencyTable, Scenario, uniform_behavior

__all__ = [
    "CorrelatorVector",
    "ProjectionOperator",
    "ProjectionResult",
    "correlators_from_behavior",
    "behavior_from_correlators",
    "projection_matrix",
    "project",
]


@dataclass(frozen=True)
class CorrelatorVector:
    """Generalized correlators of a bipartite behavior.

    ``one_a[x, i]`` holds <A^i_x> for 0 <= i <= k_A - 2 (and similarly
    ``one_b``); ``joint[x, y, i, j]`` holds <A^i_x B^j_y>.  The underlying
    coefficients are c_{ia} = k delta_{ia} - 1, which reduce to (-1)^a for
    binary outcomes.
    """

    scenario: Scenario
    one_a: np.ndarray
    one_b: np.ndarray
    joint: np.ndarray

    def __post_init__(self) -> None:
        s = self.scenario
        expect = {
            "one_a": (s.inputs_a, s.outputs_a - 1),
            "one_b": (s.inputs_b, s.outputs_b - 1),
            "joint": (s.inputs_a, s.inputs_b, s.outputs_a - 1, s.outputs_b - 1),
        }
        for name, shape in expect.items():
            arr = np.asarray(getattr(self, name), dtype=float).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.one_a.size + self.one_b.size + self.joint.size


def _as_behavior(P: Behavior | FrequencyTable) -> Behavior:
    return P.frequencies() if isinstance(P, FrequencyTable) else P


def correlators_from_behavior(P: Behavior | FrequencyTable) -> CorrelatorVector:
    """Correlators with one-party marginals averaged over the distant input.

    Signaling input is the intended use case: averaging uniformly over the
    other party's settings is the unique choice commuting with relabelings.
    """
    P = _as_behavior(P)
    s = P.scenario
    t = P.table
    ka, kb = s.outputs_a, s.outputs_b
    ca = ka * np.eye(ka)[: ka - 1] - 1.0  # c_{ia}, shape (ka-1, ka)
    cb = kb * np.eye(kb)[: kb - 1] - 1.0
    pa_avg = t.sum(axis=3).mean(axis=1)  # (x, a)
    pb_avg = t.sum(axis=2).mean(axis=0)  # (y, b)
    one_a = pa_avg @ ca.T
    one_b = pb_avg @ cb.T
    joint = np.einsum("ia,jb,xyab->xyij", ca, cb, t)
    return CorrelatorVector(s, one_a, one_b, joint)


def behavior_from_correlators(c: CorrelatorVector) -> Behavior:
    """Invert the correlator parametrization.

    For binary outcomes this is P(a,b|x,y) = [1 + (-1)^a <A_x> + (-1)^b <B_y>
    + (-1)^(a+b) <A_x B_y>] / 4.  The output satisfies the nonsignaling
    identities exactly but may contain negative entries.
    """
    s = c.scenario
    ka, kb = s.outputs_a, s.outputs_b
    pa = np.empty((s.inputs_a, ka))
    pa[:, : ka - 1] = (c.one_a + 1.0) / ka
    pa[:, ka - 1] = 1.0 - pa[:, : ka - 1].sum(axis=1)
    pb = np.empty((s.inputs_b, kb))
    pb[:, : kb - 1] = (c.one_b + 1.0) / kb
    pb[:, kb - 1] = 1.0 - pb[:, : kb - 1].sum(axis=1)
    t = np.empty(s.shape)
    for x in range(s.inputs_a):
        for y in range(s.inputs_b):
            block = np.empty((ka, kb))
            core = (
                c.joint[x, y]
                + ka * pa[x, : ka - 1][:, None]
                + kb * pb[y, : kb - 1][None, :]
                - 1.0
            ) / (ka * kb)
            block[: ka - 1, : kb - 1] = core
            block[: ka - 1, kb - 1] = pa[x, : ka - 1] - core.sum(axis=1)
            block[ka - 1, : kb - 1] = pb[y, : kb - 1] - core.sum(axis=0)
            block[ka - 1, kb - 1] = 1.0 - block.reshape(-1)[:-1].sum()
            t[x, y] = block
    return Behavior.from_array(s, t.reshape(-1))


@dataclass(frozen=True)
class ProjectionOperator:
    """Dense matrix form of the projection; idempotent and symmetric."""

    scenario: Scenario
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.scenario.dim, self.scenario.dim):
            raise ValueError("projection matrix has the wrong shape")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p


def _explicit_matrix_2222() -> np.ndarray:
    """Explicit 16x16 form for binary inputs/outputs.

    Pi = 1 - (1/16) sum over the four sign patterns that generate the
    signaling directions; rows indexed by (a,b,x,y), columns by primed
    labels, both laid out in the canonical flat order.
    """
    s = CHSH_SCENARIO
    signs = [(1, -1, -1, 1), (1, -1, -1, -1), (-1, 1, 1, -1), (-1, 1, -1, -1)]
    pi = np.eye(16)
    for i, j, k, l in signs:
        v = np.empty(16)
        for x, y, a, b in s.events():
            v[s.index(x, y, a, b)] = i**a * j**b * k**x * l**y
        pi -= np.outer(v, v) / 16.0
    return pi


def _algorithm_apply(p: np.ndarray, scenario: Scenario) -> np.ndarray:
    b = Behavior(scenario, p, physical=False, atol=1e-6)
    return behavior_from_correlators(correlators_from_behavior(b)).p


@lru_cache(maxsize=8)
def projection_matrix(scenario: Scenario) -> ProjectionOperator:
    """Projection operator; explicit form for 2x2x2, materialized otherwise.

    The general path decomposes each basis vector into its per-setting-sum
    component (passed through untouched) and a zero-sum remainder run through
    the correlator algorithm around the uniform behavior; on 2x2x2 this
    reproduces the explicit matrix to machine precision.
    """
    if scenario == CHSH_SCENARIO:
        return ProjectionOperator(scenario, _explicit_matrix_2222())
    d = scenario.dim
    k = scenario.outputs_a * scenario.outputs_b
    n_set = scenario.n_settings
    p0 = uniform_behavior(scenario).p
    base = _algorithm_apply(p0, scenario)
    m = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        block_sums = e.reshape(n_set, k).sum(axis=1)
        u = np.repeat(block_sums / k, k)
        v = e - u
        m[:, i] = u + _algorithm_apply(p0 + v, scenario) - base
    return ProjectionOperator(scenario, m)


@dataclass(frozen=True)
class ProjectionResult:
    """Decomposition f = p_ns + p_si with p_si orthogonal to the NS space."""

    p_ns: Behavior
    p_si: np.ndarray
    unphysical: bool
    min_entry: float


def project(f: Behavior | FrequencyTable, tol: float = 1e-12) -> ProjectionResult:
    """Project onto the nonsignaling affine space; never clamps negatives."""
    fb = _as_behavior(f)
    if fb.scenario == CHSH_SCENARIO:
        p_ns = projection_matrix(fb.scenario)(fb.p)
    else:
        p_ns = _algorithm_apply(fb.p, fb.scenario)
    p_si = fb.p - p_ns
    min_entry = float(p_ns.min())
    return ProjectionResult(
        Behavior.from_array(fb.scenario, p_ns, atol=1e-8),
        p_si,
        min_entry < -tol,
        min_entry,
    )
