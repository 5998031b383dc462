"""Statistical distances between frequencies and behaviors."""

from __future__ import annotations

import numpy as np

from .core import Behavior, FrequencyTable

__all__ = ["kl_divergence", "behavior_kl", "lp_distance", "strictly_nonorthogonal"]


def _kl_bits(weights: np.ndarray, f: np.ndarray, p: np.ndarray) -> float:
    """sum w_i f_i log2(f_i / p_i) with the 0 log 0 convention."""
    mass = weights * f
    active = mass > 0.0
    if np.any(p[active] <= 0.0):
        return float("inf")
    return float(np.sum(mass[active] * np.log2(f[active] / p[active])))


NEGATIVE_ENTRY_TOL = 1e-9


def kl_divergence(f: FrequencyTable, P: Behavior) -> float:
    """KL divergence D(f || P) in bits, weighted by the setting frequencies.

    Zero-count cells contribute nothing; a positive count where P vanishes
    gives +inf.
    """
    if f.scenario != P.scenario:
        raise ValueError("frequency table and behavior scenarios differ")
    if P.p.min() < -NEGATIVE_ENTRY_TOL:
        raise ValueError("KL divergence needs a nonnegative behavior")
    k = f.scenario.outputs_a * f.scenario.outputs_b
    weights = np.repeat(f.setting_weights, k)
    return _kl_bits(weights, f.frequencies().p, np.maximum(P.p, 0.0))


def behavior_kl(P1: Behavior, P2: Behavior, setting_weights: np.ndarray | None = None) -> float:
    """D(P1 || P2) in bits with uniform setting weights unless given."""
    if P1.scenario != P2.scenario:
        raise ValueError("behavior scenarios differ")
    n = P1.scenario.n_settings
    w = np.full(n, 1.0 / n) if setting_weights is None else np.asarray(setting_weights, float)
    k = P1.scenario.outputs_a * P1.scenario.outputs_b
    return _kl_bits(np.repeat(w, k), np.maximum(P1.p, 0.0), np.maximum(P2.p, 0.0))


def lp_distance(P1: Behavior, P2: Behavior, p: float) -> float:
    """p-norm of the entrywise difference over all (a,b,x,y); p in {1, 2, inf}."""
    if P1.scenario != P2.scenario:
        raise ValueError("behavior scenarios differ")
    d = P1.p - P2.p
    if p == 1:
        return float(np.abs(d).sum())
    if p == 2:
        return float(np.linalg.norm(d))
    if p in (np.inf, float("inf")):
        return float(np.abs(d).max())
    raise ValueError("supported norms: 1, 2, inf")


def strictly_nonorthogonal(P1: Behavior, P2: Behavior) -> bool:
    """True iff sum_ab P1(a,b|x,y) P2(a,b|x,y) > 0 for every setting."""
    if P1.scenario != P2.scenario:
        raise ValueError("behavior scenarios differ")
    if not (P1.physical and P2.physical):
        raise ValueError("strict nonorthogonality is defined for physical behaviors")
    k = P1.scenario.outputs_a * P1.scenario.outputs_b
    n = P1.scenario.n_settings
    overlaps = (P1.p.reshape(n, k) * P2.p.reshape(n, k)).sum(axis=1)
    return bool(np.all(overlaps > 0.0))
