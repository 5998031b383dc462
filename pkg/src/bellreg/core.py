"""Bell-scenario data model: scenarios, behaviors, frequency tables.

A behavior is the flat vector of conditional distributions P(a,b|x,y) for a
bipartite Bell scenario, stored in lexicographic (x, y, a, b) order.  That
single layout is used everywhere: file formats, the projection matrix, and
the moment-matrix behavior maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "Scenario",
    "Behavior",
    "FrequencyTable",
    "is_nonsignaling",
    "uniform_behavior",
]

CLOSED_FORM_TOL = 1e-12
SOLVER_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """Numbers of settings and (per-setting) outcomes for each party."""

    inputs_a: int
    inputs_b: int
    outputs_a: int
    outputs_b: int

    def __post_init__(self) -> None:
        for name in ("inputs_a", "inputs_b", "outputs_a", "outputs_b"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.inputs_a, self.inputs_b, self.outputs_a, self.outputs_b)

    @property
    def dim(self) -> int:
        return self.inputs_a * self.inputs_b * self.outputs_a * self.outputs_b

    @property
    def n_settings(self) -> int:
        return self.inputs_a * self.inputs_b

    def index(self, x: int, y: int, a: int, b: int) -> int:
        """Flat index of (a, b | x, y) in the canonical (x, y, a, b) order."""
        return ((x * self.inputs_b + y) * self.outputs_a + a) * self.outputs_b + b

    def settings(self) -> Iterator[tuple[int, int]]:
        for x in range(self.inputs_a):
            for y in range(self.inputs_b):
                yield x, y

    def events(self) -> Iterator[tuple[int, int, int, int]]:
        for x, y in self.settings():
            for a in range(self.outputs_a):
                for b in range(self.outputs_b):
                    yield x, y, a, b

    def to_json(self) -> dict:
        return {
            "inputs_a": self.inputs_a,
            "inputs_b": self.inputs_b,
            "outputs_a": self.outputs_a,
            "outputs_b": self.outputs_b,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        return cls(
            int(obj["inputs_a"]),
            int(obj["inputs_b"]),
            int(obj["outputs_a"]),
            int(obj["outputs_b"]),
        )


CHSH_SCENARIO = Scenario(2, 2, 2, 2)


def _per_setting_sums(scenario: Scenario, p: np.ndarray) -> np.ndarray:
    return p.reshape(scenario.n_settings, scenario.outputs_a * scenario.outputs_b).sum(axis=1)


@dataclass(frozen=True)
class Behavior:
    """Vector of conditional outcome distributions P(a,b|x,y).

    Normalization per setting is always required.  ``physical`` records
    whether all entries are nonnegative; signaling frequency vectors and
    projection outputs with negative entries are stored with
    ``physical=False``.  Nonsignaling is *not* required by the type.
    """

    scenario: Scenario
    p: np.ndarray
    physical: bool = field(default=True)
    atol: float = field(default=1e-8, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if p.size != self.scenario.dim:
            raise ValueError(
                f"behavior vector has length {p.size}, scenario needs {self.scenario.dim}"
            )
        sums = _per_setting_sums(self.scenario, p)
        if np.max(np.abs(sums - 1.0)) > self.atol:
            raise ValueError(
                f"per-setting normalization violated by {np.max(np.abs(sums - 1.0)):.3g}"
            )
        if self.physical and p.min() < -self.atol:
            raise ValueError(
                f"negative entry {p.min():.3g} in a behavior flagged physical"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_array(cls, scenario: Scenario, p: np.ndarray, atol: float = 1e-8) -> "Behavior":
        """Build a behavior, auto-detecting the ``physical`` flag."""
        p = np.asarray(p, dtype=float).reshape(-1)
        return cls(scenario, p, physical=bool(p.min() >= -atol), atol=atol)

    @property
    def table(self) -> np.ndarray:
        """View with shape (inputs_a, inputs_b, outputs_a, outputs_b)."""
        return self.p.reshape(self.scenario.shape)

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.p[self.scenario.index(x, y, a, b)])

    def marginal_a(self, a: int, x: int, y: int) -> float:
        """P(a|x,y) by summing over Bob's outcome."""
        return float(self.table[x, y, a, :].sum())

    def marginal_b(self, b: int, x: int, y: int) -> float:
        return float(self.table[x, y, :, b].sum())

    def allclose(self, other: "Behavior", atol: float = 1e-9) -> bool:
        return self.scenario == other.scenario and bool(
            np.allclose(self.p, other.p, atol=atol, rtol=0.0)
        )

    def to_json(self) -> dict:
        return {"scenario": self.scenario.to_json(), "p": self.p.tolist()}

    @classmethod
    def from_json(cls, obj: dict, atol: float = 1e-8) -> "Behavior":
        scenario = Scenario.from_json(obj["scenario"])
        return cls.from_array(scenario, np.asarray(obj["p"], dtype=float), atol=atol)


def uniform_behavior(scenario: Scenario = CHSH_SCENARIO) -> Behavior:
    k = scenario.outputs_a * scenario.outputs_b
    return Behavior(scenario, np.full(scenario.dim, 1.0 / k))


@dataclass(frozen=True)
class FrequencyTable:
    """Integer counts N_{a,b,x,y} with derived relative frequencies.

    ``setting_weights`` defaults to N_{x,y} / sum N_{x,y}; studies keep the
    per-setting totals constant so the weights are uniform.
    """

    scenario: Scenario
    counts: np.ndarray
    setting_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if np.max(np.abs(counts - rounded)) > 0:
                raise ValueError("counts must be integers")
            counts = rounded.astype(np.int64)
        counts = counts.reshape(-1).astype(np.int64)
        if counts.size != self.scenario.dim:
            raise ValueError("counts length does not match scenario dimension")
        if counts.min() < 0:
            raise ValueError("counts must be nonnegative")
        if self.per_setting_totals_of(counts).min() == 0:
            raise ValueError("every setting needs at least one trial")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.setting_weights is None:
            totals = self.per_setting_totals_of(counts).astype(float)
            w = totals / totals.sum()
        else:
            w = np.asarray(self.setting_weights, dtype=float).reshape(-1)
            if w.size != self.scenario.n_settings:
                raise ValueError("setting_weights length must equal the number of settings")
            if abs(w.sum() - 1.0) > 1e-9 or w.min() < 0:
                raise ValueError("setting_weights must be a probability vector")
        w.setflags(write=False)
        object.__setattr__(self, "setting_weights", w)

    def per_setting_totals_of(self, counts: np.ndarray) -> np.ndarray:
        k = self.scenario.outputs_a * self.scenario.outputs_b
        return counts.reshape(self.scenario.n_settings, k).sum(axis=1)

    @property
    def per_setting_totals(self) -> np.ndarray:
        """N_{x,y} in (x, y) order."""
        return self.per_setting_totals_of(self.counts)

    @property
    def n_trials(self) -> int:
        """min_{x,y} N_{x,y}."""
        return int(self.per_setting_totals.min())

    def frequencies(self) -> Behavior:
        """Relative frequencies f(a,b|x,y); generically signaling."""
        k = self.scenario.outputs_a * self.scenario.outputs_b
        c = self.counts.reshape(self.scenario.n_settings, k).astype(float)
        f = c / c.sum(axis=1, keepdims=True)
        return Behavior(self.scenario, f.reshape(-1))

    def joint_weights(self) -> np.ndarray:
        """f(a,b,x,y) = f(x,y) f(a,b|x,y), flat in (x,y,a,b) order."""
        k = self.scenario.outputs_a * self.scenario.outputs_b
        f = self.frequencies().p.reshape(self.scenario.n_settings, k)
        return (f * self.setting_weights[:, None]).reshape(-1)

    def to_json(self) -> dict:
        return {"scenario": self.scenario.to_json(), "counts": self.counts.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "FrequencyTable":
        scenario = Scenario.from_json(obj["scenario"])
        return cls(scenario, np.asarray(obj["counts"]))


def is_nonsignaling(P: Behavior, tol: float = 1e-9) -> tuple[bool, float]:
    """Check the marginal identities; returns (ok, worst absolute deviation).

    Alice's marginal P(a|x,y) must not depend on y, and Bob's P(b|x,y) must
    not depend on x.
    """
    t = P.table
    pa = t.sum(axis=3)  # (x, y, a); must be constant in y
    pb = t.sum(axis=2)  # (x, y, b); must be constant in x
    worst = max(float(np.ptp(pa, axis=1).max()), float(np.ptp(pb, axis=0).max()))
    return worst <= tol, worst
