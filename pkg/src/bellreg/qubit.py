"""Two-qubit pure-state strategies with binary projective measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Behavior, Scenario

__all__ = ["QubitStrategy", "behavior_from_qubit_strategy"]

PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def bloch_projector(n: np.ndarray, outcome: int) -> np.ndarray:
    """Projector (1 + (-1)^outcome n.sigma) / 2 for a unit Bloch vector."""
    nsigma = n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"]
    return 0.5 * (np.eye(2, dtype=complex) + (-1.0) ** outcome * nsigma)


@dataclass(frozen=True)
class QubitStrategy:
    """Pure two-qubit state plus per-setting Bloch vectors for both parties.

    ``state`` holds the coefficients on |00>, |01>, |10>, |11>; measurement
    directions are real unit 3-vectors, outcome 0 projecting on the +1
    eigenspace of n.sigma.
    """

    state: np.ndarray
    alice_meas: np.ndarray
    bob_meas: np.ndarray
    atol: float = 1e-9

    def __post_init__(self) -> None:
        state = np.asarray(self.state, dtype=complex).reshape(-1)
        if state.size != 4:
            raise ValueError("state must have 4 components")
        if abs(np.linalg.norm(state) - 1.0) > self.atol:
            raise ValueError(f"state norm {np.linalg.norm(state):.6g} is not 1")
        alice = np.asarray(self.alice_meas, dtype=float).reshape(-1, 3)
        bob = np.asarray(self.bob_meas, dtype=float).reshape(-1, 3)
        for name, vs in (("alice", alice), ("bob", bob)):
            norms = np.linalg.norm(vs, axis=1)
            if np.max(np.abs(norms - 1.0)) > self.atol:
                raise ValueError(f"{name} Bloch vectors must be unit length")
        for arr, attr in ((state, "state"), (alice, "alice_meas"), (bob, "bob_meas")):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.alice_meas.shape[0], self.bob_meas.shape[0], 2, 2)


def behavior_from_qubit_strategy(strategy: QubitStrategy) -> Behavior:
    """Born-rule behavior <psi| Pi^x_a (x) Pi^y_b |psi>; always nonsignaling."""
    s = strategy.scenario
    psi = strategy.state
    p = np.empty(s.dim)
    for x in range(s.inputs_a):
        pa = [bloch_projector(strategy.alice_meas[x], a) for a in range(2)]
        for y in range(s.inputs_b):
            pb = [bloch_projector(strategy.bob_meas[y], b) for b in range(2)]
            for a in range(2):
                for b in range(2):
                    op = np.kron(pa[a], pb[b])
                    val = np.real(np.conj(psi) @ (op @ psi))
                    p[s.index(x, y, a, b)] = max(val, 0.0) if val > -1e-15 else val
    return Behavior(s, p, physical=True, atol=1e-10)
