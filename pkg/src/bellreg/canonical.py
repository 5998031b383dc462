"""Canonical quantum distributions used throughout the studies.

chsh      maximal CHSH violation, entries 1/4 + (-1)^(a+b+xy) sqrt(2)/8
chsh90    90% chsh mixed with the uniformly random distribution
tau125    partially entangled state maximally violating the tau=1.25 tilted
          inequality; computed from its state/measurement realization
mdl       Hardy-type distribution on the boundary of both the quantum set
          and the nonsignaling polytope; computed from its realization
uniform   all entries 1/4
"""

from __future__ import annotations

import numpy as np

from .core import Behavior, CHSH_SCENARIO, uniform_behavior
from .qubit import QubitStrategy, behavior_from_qubit_strategy

__all__ = ["canonical_distribution", "canonical_strategy", "CANONICAL_NAMES"]

CANONICAL_NAMES = ("chsh", "chsh90", "tau125", "mdl", "uniform")


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _chsh_strategy() -> QubitStrategy:
    # |Psi+> = (|01> + |10>)/sqrt(2); both parties measure in the x-z plane
    # at angles 3pi/8 (input 0) and 7pi/8 (input 1) from the z axis.
    state = np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0)
    meas = np.array(
        [
            [np.sin(3 * np.pi / 8), 0.0, np.cos(3 * np.pi / 8)],
            [np.sin(7 * np.pi / 8), 0.0, np.cos(7 * np.pi / 8)],
        ]
    )
    return QubitStrategy(state, meas, meas)


def _tau125_strategy() -> QubitStrategy:
    # partially entangled state with amplitudes (0.91, 0.42); both parties
    # measure n0.sigma, n1.sigma with n0 ~ (0.26, 0, -0.97) and
    # n1 ~ -(0.87, 0, 0.49).  The relative sign between the amplitudes is
    # negative: that choice maximally violates the tau=1.25 inequality
    # (value 0.0342) while the positive sign does not violate it at all.
    state = np.zeros(4)
    state[[0, 3]] = _unit([0.91, -0.42])
    meas = np.stack([_unit([0.26, 0.0, -0.97]), -_unit([0.87, 0.0, 0.49])])
    return QubitStrategy(state, meas, meas)


def _mdl_strategy() -> QubitStrategy:
    # |Psi> = (|01> + |10> - |11>)/sqrt(3), sigma_x for input 0 and sigma_z
    # for input 1 on both sides.
    state = np.array([0.0, 1.0, 1.0, -1.0]) / np.sqrt(3.0)
    meas = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return QubitStrategy(state, meas, meas)


_STRATEGIES = {"chsh": _chsh_strategy, "tau125": _tau125_strategy, "mdl": _mdl_strategy}


def canonical_strategy(name: str) -> QubitStrategy:
    """Generating qubit strategy, for the distributions that have a pure one."""
    try:
        return _STRATEGIES[name]()
    except KeyError:
        raise ValueError(
            f"no pure-state realization stored for {name!r}; available: {sorted(_STRATEGIES)}"
        ) from None


def canonical_distribution(name: str) -> Behavior:
    s = CHSH_SCENARIO
    if name == "chsh":
        p = np.empty(s.dim)
        for x, y, a, b in s.events():
            p[s.index(x, y, a, b)] = 0.25 + (-1.0) ** (a + b + x * y) * np.sqrt(2.0) / 8.0
        return Behavior(s, p, atol=1e-12)
    if name == "chsh90":
        p = np.empty(s.dim)
        for x, y, a, b in s.events():
            p[s.index(x, y, a, b)] = 0.25 + 0.9 * (-1.0) ** (a + b + x * y) * np.sqrt(2.0) / 8.0
        return Behavior(s, p, atol=1e-12)
    if name in ("tau125", "mdl"):
        return behavior_from_qubit_strategy(canonical_strategy(name))
    if name == "uniform":
        return uniform_behavior(s)
    raise ValueError(f"unknown distribution {name!r}; valid names: {CANONICAL_NAMES}")


def mdl_closed_form() -> Behavior:
    """The Hardy-type distribution written directly from its closed form.

    P(a,b|x,y) = (8ab+1)/12 d_{x0} d_{y0} + (1 - d_{a0} d_{b0})/3 d_{xy,1}
               + (3ab+1)/6 (1 - d_{ax} d_{by}) d_{x xor y,1}; used to
    cross-check the state-based construction.
    """
    s = CHSH_SCENARIO
    p = np.zeros(s.dim)
    for x, y, a, b in s.events():
        val = 0.0
        if x == 0 and y == 0:
            val += (8 * a * b + 1) / 12.0
        if x * y == 1:
            val += (0.0 if (a == 0 and b == 0) else 1.0) / 3.0
        if x ^ y == 1:
            val += (3 * a * b + 1) / 6.0 * (0.0 if (a == x and b == y) else 1.0)
        p[s.index(x, y, a, b)] = val
    return Behavior(s, p, atol=1e-12)
