"""Feasibility and linear-objective programs over the moment relaxations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..conic.build import ProblemBuilder
from ..conic.problem import ConicProblem, ConicSolution
from ..conic.solver import SolverOptions, solve_conic
from ..core import Behavior
from ..functionals import BellFunctional
from .moments import MomentStructure

__all__ = [
    "MomentProgram",
    "feasibility_problem",
    "check_feasibility",
    "maximize_functional",
]


@dataclass
class MomentProgram:
    """A cone program over a moment structure, with variable bookkeeping."""

    problem: ConicProblem
    structure: MomentStructure
    z_idx: np.ndarray
    extra_idx: dict
    pin_rows: slice | None = None

    def behavior(self, sol: ConicSolution) -> Behavior:
        return self.structure.behavior_from_classes(sol.x[self.z_idx])

    def chi(self, sol: ConicSolution) -> np.ndarray:
        return self.structure.chi(sol.x[self.z_idx])


def moment_block(builder: ProblemBuilder, ms: MomentStructure) -> np.ndarray:
    """Add class variables, the normalization pin, and the PSD constraint."""
    z = builder.new_vars(ms.n_classes)
    builder.eq([([z[ms.identity_class]], [1.0])], [1.0])
    builder.psd(
        ms.side,
        builder.sparse_rows(ms.svec_map, z, negate=True),
        np.zeros(ms.svec_dim),
    )
    return z


def pin_behavior(builder: ProblemBuilder, ms: MomentStructure, z: np.ndarray, P: Behavior) -> None:
    """Equality rows tr[F_abxy chi] = P(a,b|x,y), one per behavior entry."""
    builder.eq(builder.sparse_rows(ms.behavior_map, z), P.p)


def feasibility_problem(ms: MomentStructure, P: Behavior | None) -> MomentProgram:
    """Membership test for P in the level-ell relaxation; P=None leaves the
    behavior free (used by estimators, boundary slices, and Bell maxima)."""
    if P is not None and P.scenario != ms.scenario:
        raise ValueError("behavior scenario does not match the moment structure")
    builder = ProblemBuilder()
    z = moment_block(builder, ms)
    if P is not None:
        pin_behavior(builder, ms, z, P)
    return MomentProgram(builder.build(np.zeros(builder.n)), ms, z, {})


def check_feasibility(
    ms: MomentStructure, P: Behavior, opts: SolverOptions | None = None
) -> tuple[bool, ConicSolution]:
    prog = feasibility_problem(ms, P)
    sol = solve_conic(prog.problem, opts or SolverOptions(eps_abs=1e-9, eps_rel=1e-9))
    return sol.status == "optimal", sol


def maximize_functional(
    ms: MomentStructure, F: BellFunctional, opts: SolverOptions | None = None
) -> tuple[float, Behavior]:
    """max F(P) over the relaxation, with the behavior left free."""
    builder = ProblemBuilder()
    z = moment_block(builder, ms)
    c = np.zeros(builder.n)
    c[z] = -(ms.behavior_map.T @ F.weighted_coefficients())
    sol = solve_conic(builder.build(c), opts or SolverOptions())
    if sol.status != "optimal":
        raise RuntimeError(f"functional maximization failed: {sol.status}")
    return -sol.objective, ms.behavior_from_classes(sol.x[z])
