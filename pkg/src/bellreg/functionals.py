"""Linear Bell functionals, their evaluation, and local bounds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Behavior, CHSH_SCENARIO, Scenario

__all__ = [
    "BellFunctional",
    "evaluate_functional",
    "local_bound",
    "chsh_functional",
    "itau_functional",
    "mdl_functional",
]


@dataclass(frozen=True)
class BellFunctional:
    """Coefficients beta^{xy}_{ab}, optionally with per-setting weights.

    The value on a behavior is sum_{xy} w(x,y) sum_{ab} beta^{xy}_{ab}
    P(a,b|x,y); ``setting_weights`` is used for functionals defined on joint
    events (weights default to 1, i.e. plain coefficients on conditionals).
    """

    scenario: Scenario
    beta: np.ndarray
    setting_weights: np.ndarray | None = None
    local_bound: float | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if beta.size != self.scenario.dim:
            raise ValueError("coefficient vector does not match the scenario dimension")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.setting_weights is not None:
            w = np.asarray(self.setting_weights, dtype=float).reshape(-1)
            if w.size != self.scenario.n_settings:
                raise ValueError("setting_weights must have one entry per setting")
            w.setflags(write=False)
            object.__setattr__(self, "setting_weights", w)

    def weighted_coefficients(self) -> np.ndarray:
        """Flat coefficients with setting weights folded in."""
        if self.setting_weights is None:
            return self.beta
        k = self.scenario.outputs_a * self.scenario.outputs_b
        w = np.repeat(self.setting_weights, k)
        return self.beta * w

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario.to_json(),
            "beta": self.beta.tolist(),
            "setting_weights": None
            if self.setting_weights is None
            else self.setting_weights.tolist(),
            "local_bound": self.local_bound,
            "name": self.name,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BellFunctional":
        return cls(
            Scenario.from_json(obj["scenario"]),
            np.asarray(obj["beta"], dtype=float),
            None if obj.get("setting_weights") is None else np.asarray(obj["setting_weights"], dtype=float),
            obj.get("local_bound"),
            obj.get("name", ""),
        )


def evaluate_functional(F: BellFunctional, P: Behavior) -> float:
    if F.scenario != P.scenario:
        raise ValueError("functional and behavior live in different scenarios")
    return float(F.weighted_coefficients() @ P.p)


def deterministic_behavior(scenario: Scenario, alice: tuple[int, ...], bob: tuple[int, ...]) -> Behavior:
    """Local deterministic point with outcome maps a = alice[x], b = bob[y]."""
    p = np.zeros(scenario.dim)
    for x, y in scenario.settings():
        p[scenario.index(x, y, alice[x], bob[y])] = 1.0
    return Behavior(scenario, p)


def local_bound(F: BellFunctional, max_strategies: int = 1_000_000) -> float:
    """Maximum of the functional over all local deterministic behaviors.

    The deterministic strategies are enumerated outright, so the product
    outputs_a**inputs_a * outputs_b**inputs_b must stay below the cap.
    """
    s = F.scenario
    n_strategies = s.outputs_a**s.inputs_a * s.outputs_b**s.inputs_b
    if n_strategies > max_strategies:
        raise ValueError(
            f"{n_strategies} deterministic strategies exceed the enumeration cap "
            f"{max_strategies}; supply an explicit bound instead"
        )
    coeff = F.weighted_coefficients().reshape(s.shape)
    best = -np.inf
    for alice in itertools.product(range(s.outputs_a), repeat=s.inputs_a):
        # value factorizes as sum_{x,y} coeff[x, y, alice[x], bob[y]]
        ca = coeff[np.arange(s.inputs_a), :, np.asarray(alice), :]  # (x, y, b)
        per_y = ca.sum(axis=0)  # (y, b)
        best = max(best, float(per_y.max(axis=1).sum()))
    return best


def chsh_functional(scenario: Scenario = CHSH_SCENARIO) -> BellFunctional:
    """CHSH coefficients (-1)^(a+b+xy); local bound 2, quantum maximum 2*sqrt(2)."""
    if scenario != CHSH_SCENARIO:
        raise ValueError("CHSH is defined for the 2x2x2 scenario")
    beta = np.empty(scenario.dim)
    for x, y, a, b in scenario.events():
        beta[scenario.index(x, y, a, b)] = (-1.0) ** (a + b + x * y)
    return BellFunctional(scenario, beta, local_bound=2.0, name="chsh")


def itau_functional(tau: float = 1.25) -> BellFunctional:
    """Tilted functional sum_xy (-1)^xy P(0,0|x,y) - tau sum_a [P(a,0|1,0) + P(0,a|0,1)].

    Local bound 0 for the tau range studied.
    """
    s = CHSH_SCENARIO
    beta = np.zeros(s.dim)
    for x, y in s.settings():
        beta[s.index(x, y, 0, 0)] += (-1.0) ** (x * y)
    for a in range(2):
        beta[s.index(1, 0, a, 0)] -= tau
        beta[s.index(0, 1, 0, a)] -= tau
    return BellFunctional(s, beta, local_bound=0.0, name=f"itau{tau:g}")


def mdl_functional(l: float = 0.1, h: float = 0.3) -> BellFunctional:
    """Measurement-dependent-locality functional on joint events.

    l P(0,0,0,0) - h [P(0,1,0,1) + P(1,0,1,0) + P(1,1,1,1)] with uniform
    setting weights P(x,y) = 1/4.
    """
    s = CHSH_SCENARIO
    beta = np.zeros(s.dim)
    beta[s.index(0, 0, 0, 0)] = l
    beta[s.index(0, 1, 0, 1)] = -h
    beta[s.index(1, 0, 1, 0)] = -h
    beta[s.index(1, 1, 1, 1)] = -h
    return BellFunctional(s, beta, setting_weights=np.full(4, 0.25), name=f"mdl_l{l:g}_h{h:g}")


NAMED_FUNCTIONALS = {
    "chsh": chsh_functional,
    "itau125": lambda: itau_functional(1.25),
    "mdl": mdl_functional,
}


def named_functional(name: str) -> BellFunctional:
    try:
        return NAMED_FUNCTIONALS[name]()
    except KeyError:
        raise ValueError(
            f"unknown functional {name!r}; valid names: {sorted(NAMED_FUNCTIONALS)}"
        ) from None
