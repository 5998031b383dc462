"""Device-independent lower bounds on the negativity, with witnesses.

Given a behavior inside the level-ell relaxation, the program minimizes the
identity moment of chi_minus over decompositions chi^T_B = chi_plus -
chi_minus with both parts positive semidefinite and structured like moment
matrices; the partial transpose acts on the Bob factor of the moment-matrix
index pair.  The dual values on the behavior-pinning rows form an optimized
Bell-like witness: any behavior whose witness value exceeds the threshold
has negativity above (bound - margin).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..conic.build import ProblemBuilder
from ..conic.solver import SolverOptions, solve_conic
from ..core import Behavior
from ..functionals import BellFunctional, evaluate_functional
from .moments import MomentStructure, build_moment_structure
from .problems import moment_block, pin_behavior

__all__ = ["NegativityResult", "negativity_bound", "negativity_from_chsh", "witness_from_dual"]

SQRT8 = 2.0 * np.sqrt(2.0)


@dataclass
class NegativityResult:
    bound: float
    witness_beta: np.ndarray
    source_value: float
    margin: float
    behavior: Behavior
    level: int
    diagnostics: dict

    @property
    def threshold(self) -> float:
        """Witness threshold S_alpha; violation certifies negativity > alpha."""
        return self.source_value - self.margin

    @property
    def alpha(self) -> float:
        return self.bound - self.margin


class InfeasibleBehaviorError(ValueError):
    """Raised when the behavior lies outside the requested relaxation."""


def _negativity_program(ms: MomentStructure, P: Behavior):
    builder = ProblemBuilder()
    z = moment_block(builder, ms)
    pin_start = builder.n_rows
    pin_behavior(builder, ms, z, P)
    zp = builder.new_vars(ms.n_classes)
    zm = builder.new_vars(ms.n_classes)

    # chi(z)^T_B - chi(zp) + chi(zm) = 0, rowwise over svec slots
    sm = ms.svec_map.tocsr()
    rows = []
    for r in range(ms.svec_dim):
        pr = int(ms.tb_perm[r])
        sl_z = slice(sm.indptr[pr], sm.indptr[pr + 1])
        sl = slice(sm.indptr[r], sm.indptr[r + 1])
        cols = np.concatenate([z[sm.indices[sl_z]], zp[sm.indices[sl]], zm[sm.indices[sl]]])
        vals = np.concatenate([sm.data[sl_z], -sm.data[sl], sm.data[sl]])
        rows.append((cols, vals))
    builder.eq(rows, np.zeros(ms.svec_dim))

    for zz in (zp, zm):
        builder.psd(
            ms.side,
            builder.sparse_rows(ms.svec_map, zz, negate=True),
            np.zeros(ms.svec_dim),
        )
    c = np.zeros(builder.n)
    c[zm[ms.identity_class]] = 1.0
    return builder.build(c), z, slice(pin_start, pin_start + ms.scenario.dim)


def negativity_bound(
    P: Behavior,
    level: int = 2,
    opts: SolverOptions | None = None,
    margin: float = 1e-6,
) -> NegativityResult:
    """Lower bound on the negativity of any state compatible with P.

    Raises :class:`InfeasibleBehaviorError` when P is outside the level-ell
    relaxation (frequencies always are; regularize first, adding white noise
    with restore_feasibility if the solver is borderline).
    """
    ms = build_moment_structure(P.scenario, level)
    prob, z_idx, pin_rows = _negativity_program(ms, P)
    sol = solve_conic(prob, opts or SolverOptions(eps_abs=1e-9, eps_rel=1e-9))
    if sol.status == "primal_infeasible":
        raise InfeasibleBehaviorError(
            f"behavior outside the level-{level} relaxation; regularize first "
            "(restore_feasibility adds the white noise described in the docs)"
        )
    if sol.status not in ("optimal", "max_iters"):
        raise RuntimeError(f"negativity solve failed: {sol.status}")
    beta = -sol.y[pin_rows]
    return NegativityResult(
        bound=max(float(sol.objective), 0.0),
        witness_beta=beta,
        source_value=float(beta @ P.p),
        margin=margin,
        behavior=P,
        level=level,
        diagnostics=sol.summary(),
    )


def negativity_from_chsh(S: float, tol: float = 1e-9) -> float:
    """Closed-form bound (S - 2) / (4 sqrt(2) - 4), valid for S <= 2 sqrt(2).

    Super-quantum values are not quantum realizable and cannot be used to
    estimate a quantum parameter.
    """
    if S > SQRT8 + tol:
        raise ValueError(
            f"CHSH value {S} exceeds the quantum maximum 2*sqrt(2); "
            "not quantum realizable"
        )
    return max(0.0, (min(S, SQRT8) - 2.0) / (4.0 * np.sqrt(2.0) - 4.0))


def witness_from_dual(result: NegativityResult) -> tuple[BellFunctional, float]:
    """Optimized device-independent witness extracted from the dual solution.

    Returns (functional, threshold): the source behavior strictly violates
    the threshold, and any behavior with value above it has negativity above
    ``result.alpha`` up to solver tolerance.
    """
    if not np.isfinite(result.bound):
        raise ValueError("witness extraction needs an optimal solve")
    F = BellFunctional(
        result.behavior.scenario,
        result.witness_beta,
        name=f"negativity_witness_l{result.level}",
    )
    # strict violation by construction of the margin
    assert evaluate_functional(F, result.behavior) > result.threshold
    return F, result.threshold
