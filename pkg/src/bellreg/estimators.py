"""Point estimators mapping relative frequencies to physical behaviors.

projection  orthogonal projection onto the nonsignaling affine space (may
            return negative entries; reported, not clamped)
ml          unique KL-divergence minimizer over the target set, solved as an
            exponential-cone program (one cone per nonzero-count cell, dummy
            middle coordinate 1)
ls          unique 2-norm minimizer, second-order-cone program
l1 / linf   nearest point in the chosen p-norm via linear epigraph rows;
            minimizers are generically nonunique and flagged as such

Targets: the nonsignaling polytope ("ns") or the level-ell moment
relaxation ("q1", "q2").
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .conic.build import ProblemBuilder
from .conic.solver import SolverOptions, solve_conic
from .core import Behavior, FrequencyTable, Scenario, uniform_behavior
from .metrics import kl_divergence, lp_distance
from .npa.moments import MomentStructure, build_moment_structure
from .npa.problems import check_feasibility, moment_block
from .projection import project

__all__ = [
    "EstimatorSpec",
    "EstimateResult",
    "estimate",
    "estimate_ml",
    "estimate_ls",
    "estimate_pnorm",
    "restore_feasibility",
    "FeasibilityRestoreError",
]

METHODS = ("projection", "ml", "ls", "l1", "linf")
TARGETS = ("ns", "q1", "q2")

DEFAULT_SOLVER = SolverOptions(eps_abs=1e-10, eps_rel=1e-10, max_iters=50_000)


@dataclass(frozen=True)
class EstimatorSpec:
    method: str
    target: str = "q1"
    solver: SolverOptions = field(default=DEFAULT_SOLVER)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")

    @property
    def label(self) -> str:
        return self.method if self.method == "projection" else f"{self.method}_{self.target}"


@dataclass
class EstimateResult:
    p_reg: Behavior
    objective: float
    method: str
    target: str
    unique: bool
    diagnostics: dict
    chi: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "p_reg": self.p_reg.to_json(),
            "objective": self.objective,
            "method": self.method,
            "target": self.target,
            "unique": self.unique,
            "diagnostics": self.diagnostics,
        }


def _ns_polytope_vars(builder: ProblemBuilder, s: Scenario, nonnegative: bool = True) -> np.ndarray:
    """Behavior variables constrained to the nonsignaling polytope."""
    P = builder.new_vars(s.dim)
    k = s.outputs_a * s.outputs_b
    rows = []
    for i in range(s.n_settings):
        rows.append((P[i * k : (i + 1) * k], np.ones(k)))
    builder.eq(rows, np.ones(s.n_settings))
    rows = []
    # Alice marginals independent of y (y=0 as the reference column)
    for x in range(s.inputs_a):
        for a in range(s.outputs_a - 1):
            ref = [s.index(x, 0, a, b) for b in range(s.outputs_b)]
            for y in range(1, s.inputs_b):
                cur = [s.index(x, y, a, b) for b in range(s.outputs_b)]
                rows.append((P[cur + ref], np.concatenate([np.ones(s.outputs_b), -np.ones(s.outputs_b)])))
    for y in range(s.inputs_b):
        for b in range(s.outputs_b - 1):
            ref = [s.index(0, y, a, b) for a in range(s.outputs_a)]
            for x in range(1, s.inputs_a):
                cur = [s.index(x, y, a, b) for a in range(s.outputs_a)]
                rows.append((P[cur + ref], np.concatenate([np.ones(s.outputs_a), -np.ones(s.outputs_a)])))
    if rows:
        builder.eq(rows, np.zeros(len(rows)))
    if nonnegative:
        builder.nonneg([([P[i]], [-1.0]) for i in range(s.dim)], np.zeros(s.dim))
    return P


class _TargetModel:
    """Behavior variables over one of the target sets, as builder rows."""

    def __init__(self, builder: ProblemBuilder, scenario: Scenario, target: str):
        self.target = target
        self.builder = builder
        if target == "ns":
            self.P_idx = _ns_polytope_vars(builder, scenario)
            self.ms: MomentStructure | None = None
            self.z_idx = None
        else:
            self.ms = build_moment_structure(scenario, int(target[1]))
            self.z_idx = moment_block(builder, self.ms)
            self.P_idx = None
        self.scenario = scenario

    def behavior_rows(self, sign: float = 1.0):
        """Rows expressing sign * P(a,b|x,y), one per behavior entry."""
        if self.P_idx is not None:
            for i in range(self.scenario.dim):
                yield np.array([self.P_idx[i]]), np.array([sign])
        else:
            yield from self.builder.sparse_rows(
                self.ms.behavior_map, self.z_idx, negate=(sign < 0)
            )

    def extract(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        if self.P_idx is not None:
            return x[self.P_idx], None
        z = x[self.z_idx]
        return self.ms.behavior_map @ z, self.ms.chi(z)


def _finalize(p_raw: np.ndarray, scenario: Scenario) -> Behavior:
    """Snap the solver output onto the nonsignaling affine space exactly."""
    res = project(Behavior(scenario, p_raw, physical=False, atol=1e-5))
    return Behavior.from_array(scenario, res.p_ns.p, atol=1e-5)


def estimate_ml(
    f: FrequencyTable, target: str = "q1", opts: SolverOptions | None = None
) -> EstimateResult:
    """Maximum-likelihood estimate: the unique KL minimizer over the target.

    Cells with zero counts contribute no exponential cone (their 0 log 0
    terms vanish); the KL objective is reported in bits.
    """
    opts = opts or DEFAULT_SOLVER
    builder = ProblemBuilder()
    model = _TargetModel(builder, f.scenario, target)
    w = f.joint_weights()
    active = np.where(w > 0.0)[0]
    u = builder.new_vars(active.size)
    p_rows = {i: rc for i, rc in zip(range(f.scenario.dim), model.behavior_rows())}
    rows, bvals = [], []
    for j, e in enumerate(active):
        rows.append((np.array([u[j]]), np.array([-1.0])))
        bvals.append(0.0)
        rows.append((np.array([], dtype=np.intp), np.array([])))
        bvals.append(1.0)
        cols, vals = p_rows[int(e)]
        rows.append((cols, -vals))
        bvals.append(0.0)
    builder.exp_triples(active.size, rows, bvals)
    c = np.zeros(builder.n)
    c[u] = -w[active]
    sol = solve_conic(builder.build(c), opts)
    if sol.status not in ("optimal", "max_iters"):
        raise RuntimeError(f"ML estimation failed: {sol.status} ({sol.diagnostics})")
    p_raw, chi = model.extract(sol.x)
    p_reg = _finalize(p_raw, f.scenario)
    return EstimateResult(
        p_reg, kl_divergence(f, p_reg), "ml", target, True, sol.summary(), chi
    )


def estimate_ls(
    f: FrequencyTable, target: str = "q1", opts: SolverOptions | None = None
) -> EstimateResult:
    """Least-squares estimate: unique 2-norm minimizer over the target."""
    opts = opts or DEFAULT_SOLVER
    builder = ProblemBuilder()
    model = _TargetModel(builder, f.scenario, target)
    r = builder.new_vars(1)
    fp = f.frequencies().p
    rows = [(np.array([r[0]]), np.array([-1.0]))]
    bvals = [0.0]
    for i, (cols, vals) in enumerate(model.behavior_rows()):
        rows.append((cols, vals))
        bvals.append(fp[i])
    builder.soc(rows, bvals)
    c = np.zeros(builder.n)
    c[r[0]] = 1.0
    sol = solve_conic(builder.build(c), opts)
    if sol.status not in ("optimal", "max_iters"):
        raise RuntimeError(f"LS estimation failed: {sol.status} ({sol.diagnostics})")
    p_raw, chi = model.extract(sol.x)
    p_reg = _finalize(p_raw, f.scenario)
    return EstimateResult(
        p_reg,
        lp_distance(f.frequencies(), p_reg, 2),
        "ls",
        target,
        True,
        sol.summary(),
        chi,
    )


def estimate_pnorm(
    f: FrequencyTable, p: float, target: str = "q1", opts: SolverOptions | None = None
) -> EstimateResult:
    """Nearest point in the 1- or inf-norm; deterministic but nonunique.

    The returned minimizer depends on solver internals among the optimal
    set; ``unique`` is always False and no tie-break objective is added.
    """
    if p not in (1, float("inf"), np.inf):
        raise ValueError("p-norm estimators support p in {1, inf}")
    opts = opts or DEFAULT_SOLVER
    builder = ProblemBuilder()
    model = _TargetModel(builder, f.scenario, target)
    fp = f.frequencies().p
    dim = f.scenario.dim
    e = builder.new_vars(dim if p == 1 else 1)
    rows, bvals = [], []
    for i, (cols, vals) in enumerate(model.behavior_rows()):
        ei = e[i] if p == 1 else e[0]
        # e_i - (f_i - P_i) >= 0
        rows.append((np.concatenate([[ei], cols]), np.concatenate([[-1.0], -vals])))
        bvals.append(-fp[i])
        # e_i + (f_i - P_i) >= 0
        rows.append((np.concatenate([[ei], cols]), np.concatenate([[-1.0], vals])))
        bvals.append(fp[i])
    builder.nonneg(rows, bvals)
    c = np.zeros(builder.n)
    c[e] = 1.0
    sol = solve_conic(builder.build(c), opts)
    if sol.status not in ("optimal", "max_iters"):
        raise RuntimeError(f"p-norm estimation failed: {sol.status}")
    p_raw, chi = model.extract(sol.x)
    p_reg = _finalize(p_raw, f.scenario)
    return EstimateResult(
        p_reg,
        lp_distance(f.frequencies(), p_reg, p),
        "l1" if p == 1 else "linf",
        target,
        False,
        sol.summary(),
        chi,
    )


def estimate(f: FrequencyTable, spec: EstimatorSpec) -> EstimateResult:
    if spec.method == "projection":
        res = project(f)
        return EstimateResult(
            res.p_ns,
            lp_distance(f.frequencies(), res.p_ns, 2),
            "projection",
            "ns_affine",
            True,
            {"unphysical": res.unphysical, "min_entry": res.min_entry},
        )
    if spec.method == "ml":
        return estimate_ml(f, spec.target, spec.solver)
    if spec.method == "ls":
        return estimate_ls(f, spec.target, spec.solver)
    return estimate_pnorm(f, 1 if spec.method == "l1" else np.inf, spec.target, spec.solver)


class FeasibilityRestoreError(RuntimeError):
    pass


def restore_feasibility(
    P: Behavior,
    eps: float | None = None,
    target_level: int = 2,
    opts: SolverOptions | None = None,
    eps_cap: float = 1e-6,
) -> Behavior:
    """Mix with white noise, (1-eps) P + eps uniform.

    With ``eps`` given the mixture is returned directly.  In auto mode the
    noise doubles from 1e-9 until the level-``target_level`` membership test
    succeeds, erring past ``eps_cap``: at that point the input is genuinely
    far from the target and needs regularization, not noise.
    """
    uni = uniform_behavior(P.scenario)

    def mix(e: float) -> Behavior:
        return Behavior.from_array(P.scenario, (1.0 - e) * P.p + e * uni.p, atol=P.atol)

    if eps is not None:
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        return mix(eps) if eps > 0 else P
    ms = build_moment_structure(P.scenario, target_level)
    e = 1e-9
    while e <= eps_cap * (1 + 1e-12):
        Q = mix(e)
        ok, _ = check_feasibility(ms, Q, opts)
        if ok:
            return Q
        e *= 2.0
    raise FeasibilityRestoreError(
        f"still outside the level-{target_level} set at eps={eps_cap:g}; "
        "the behavior needs regularization, not white noise"
    )
