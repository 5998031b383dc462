"""Cone descriptions and Euclidean projections.

Supported blocks: zero, nonnegative orthant, second-order, positive
semidefinite (scaled upper-triangle vectorization), and the closed
exponential cone K_exp = cl{(u,v,w): v e^(u/v) <= w, v > 0}, whose closure
adds the ray set {(u,0,w): u <= 0, w >= 0}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["ConeBlock", "ConeSpec", "project_cone", "project_dual_cone", "svec", "smat"]


@dataclass(frozen=True)
class ConeBlock:
    """One cone block: kind in {zero, nonneg, soc, psd, exp}.

    ``size`` is the vector dimension for zero/nonneg/soc, the matrix side for
    psd, and the number of (u, v, w) triples for exp.
    """

    kind: str
    size: int

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "nonneg", "soc", "psd", "exp"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone block size must be >= 1")

    @property
    def dim(self) -> int:
        if self.kind == "psd":
            return self.size * (self.size + 1) // 2
        if self.kind == "exp":
            return 3 * self.size
        return self.size


@dataclass(frozen=True)
class ConeSpec:
    blocks: tuple[ConeBlock, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return out

    def to_json(self) -> list[dict]:
        return [{"kind": b.kind, "size": b.size} for b in self.blocks]

    @classmethod
    def from_json(cls, obj: list[dict]) -> "ConeSpec":
        return cls(tuple(ConeBlock(d["kind"], int(d["size"])) for d in obj))


# ---------------------------------------------------------------------------
# symmetric-matrix vectorization with trace-compatible scaling

_SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=64)
def _tri_indices(side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(side)
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, scale


def svec(S: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, off-diagonals scaled by sqrt(2).

    The scaling makes the Euclidean inner product of two svecs equal to the
    trace inner product of the matrices, so eigenvalue clipping is a genuine
    Euclidean projection in these coordinates.
    """
    rows, cols, scale = _tri_indices(S.shape[0])
    return S[rows, cols] * scale


def smat(v: np.ndarray, side: int) -> np.ndarray:
    rows, cols, scale = _tri_indices(side)
    S = np.zeros((side, side))
    vals = v / scale
    S[rows, cols] = vals
    S[cols, rows] = vals
    return S


def _project_psd(v: np.ndarray, side: int) -> np.ndarray:
    S = smat(v, side)
    w, V = np.linalg.eigh(S)
    pos = w > 0.0
    if not np.any(pos):
        return np.zeros_like(v)
    if np.all(pos):
        return v.copy()
    Vp = V[:, pos] * w[pos]
    return svec(Vp @ V[:, pos].T)


def _project_soc(v: np.ndarray) -> np.ndarray:
    t, x = v[0], v[1:]
    nx = np.linalg.norm(x)
    if nx <= t:
        return v.copy()
    if nx <= -t:
        return np.zeros_like(v)
    alpha = 0.5 * (t + nx)
    out = np.empty_like(v)
    out[0] = alpha
    out[1:] = x * (alpha / nx)
    return out


# ---------------------------------------------------------------------------
# exponential cone

_EXP_RHO_CAP = 700.0


def _exp_in_primal(r, s, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        interior = (s > 0.0) & (t > 0.0) & (r <= s * np.log(t / s))
    face = (s == 0.0) & (r <= 0.0) & (t >= 0.0)
    return interior | face


def _exp_in_polar(r, s, t):
    # K_polar = cl{(a,b,c): a > 0, c < 0, a e^(b/a) <= -e c}
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        interior = (r > 0.0) & (t < 0.0) & (np.log(r) + s / r <= 1.0 + np.log(-t))
    face = (r == 0.0) & (s <= 0.0) & (t <= 0.0)
    return interior | face


def _exp_s_of_rho(rho, r0, s0):
    return ((rho - 1.0) * r0 + s0) / (rho * rho - rho + 1.0)


def _exp_residual(rho, r0, s0, t0):
    """Sign-preserving residual of the remaining stationarity equation.

    The projection onto the curved boundary is (rho*s, s, s*e^rho) with
    s(rho) fixed by two of the three KKT equations; the third reduces to
    s(rho) (rho + e^(2 rho)) = r0 + t0 e^rho, rescaled by e^(-rho) here to
    keep the evaluation finite over the whole search range.
    """
    rho = np.clip(rho, -_EXP_RHO_CAP, _EXP_RHO_CAP)
    s = _exp_s_of_rho(rho, r0, s0)
    with np.errstate(over="ignore"):
        em, ep = np.exp(-rho), np.exp(np.clip(rho, None, 350.0))
    return s * (rho * em + ep) - r0 * em - t0


def _exp_residual_grad(rho, r0, s0, t0):
    rho = np.clip(rho, -_EXP_RHO_CAP, _EXP_RHO_CAP)
    q = rho * rho - rho + 1.0
    l = (rho - 1.0) * r0 + s0
    s = l / q
    ds = (r0 * q - l * (2.0 * rho - 1.0)) / (q * q)
    with np.errstate(over="ignore"):
        em = np.exp(-rho)
        ep = np.exp(np.clip(rho, None, 350.0))
    g = s * (rho * em + ep) - r0 * em - t0
    dg = ds * (rho * em + ep) + s * (em - rho * em + ep) + r0 * em
    return g, dg


def _exp_feasible_range(r0, s0):
    """rho interval where the boundary parametrization has s > 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        edge = 1.0 - s0 / np.where(r0 != 0.0, r0, np.nan)
    lo = np.nan_to_num(np.where(r0 > 0.0, edge, -_EXP_RHO_CAP), nan=-_EXP_RHO_CAP)
    hi = np.nan_to_num(np.where(r0 < 0.0, edge, _EXP_RHO_CAP), nan=_EXP_RHO_CAP)
    return lo, hi


_EXP_GRID = np.concatenate(
    [-np.geomspace(_EXP_RHO_CAP, 1e-4, 40), [0.0], np.geomspace(1e-4, _EXP_RHO_CAP, 40)]
)


def _exp_major_cold(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bracketed damped Newton on the stationarity root, from scratch.

    The bracket comes from a sign change of the residual on a graded grid of
    the feasible half-line {rho : (rho-1) r0 + s0 > 0}; Newton steps that
    leave the bracket fall back to its midpoint.  Rows without a bracket, or
    with a negative multiplier, take the flat-face candidate instead.
    """
    r0, s0, t0 = z[:, 0], z[:, 1], z[:, 2]
    n = z.shape[0]
    lo, hi = _exp_feasible_range(r0, s0)
    pts = np.clip(_EXP_GRID[None, :], (lo + 1e-12)[:, None], (hi - 1e-12)[:, None])
    vals, _ = _exp_residual_grad(pts, r0[:, None], s0[:, None], t0[:, None])
    flips = np.signbit(vals[:, :-1]) != np.signbit(vals[:, 1:])
    has = flips.any(axis=1)
    first = np.where(has, flips.argmax(axis=1), 0)
    idx = np.arange(n)
    blo, bhi = pts[idx, first], pts[idx, first + 1]
    flo = vals[idx, first]

    rho = 0.5 * (blo + bhi)
    for _ in range(45):
        g, dg = _exp_residual_grad(rho, r0, s0, t0)
        same = np.signbit(g) == np.signbit(flo)
        blo = np.where(same, rho, blo)
        flo = np.where(same, g, flo)
        bhi = np.where(same, bhi, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = rho - g / dg
        inside = (step > blo) & (step < bhi) & np.isfinite(step)
        rho = np.where(inside, step, 0.5 * (blo + bhi))
    return _exp_pick(z, rho, has)


def _exp_pick(z: np.ndarray, rho: np.ndarray, root_usable) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the boundary point and choose root vs flat-face candidate."""
    r0, s0, t0 = z[:, 0], z[:, 1], z[:, 2]
    n = z.shape[0]
    s = np.maximum(_exp_s_of_rho(rho, r0, s0), 0.0)
    with np.errstate(over="ignore"):
        t = s * np.exp(np.clip(rho, None, 350.0))
    root = np.stack([rho * s, s, t], axis=1)
    face = np.stack([np.minimum(r0, 0.0), np.zeros(n), np.maximum(t0, 0.0)], axis=1)
    scale = 1.0 + np.linalg.norm(z, axis=1)
    root_ok = root_usable & (t >= t0 - 1e-9 * scale) & np.isfinite(root).all(axis=1)
    d_root = ((z - root) ** 2).sum(axis=1)
    d_face = ((z - face) ** 2).sum(axis=1)
    # the face candidate is optimal only when its residual is polar-feasible
    face_ok = _exp_in_polar(
        r0 - face[:, 0] + 1e-12 * scale, s0, t0 - face[:, 2] - 1e-12 * scale
    ) | ((np.abs(z - face) <= 1e-12 * scale[:, None]).all(axis=1))
    take_face = ~root_ok | (face_ok & (d_face < d_root))
    out = np.where(take_face[:, None], face, root)
    rho_out = np.where(take_face, np.nan, rho)
    return out, rho_out


def _exp_major_warm(z: np.ndarray, rho0: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Plain damped Newton from a previous root; flags rows needing a restart."""
    r0, s0, t0 = z[:, 0], z[:, 1], z[:, 2]
    lo, hi = _exp_feasible_range(r0, s0)
    rho = np.clip(rho0, lo + 1e-11, hi - 1e-11)
    for _ in range(12):
        g, dg = _exp_residual_grad(rho, r0, s0, t0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = rho - g / dg
        step = np.clip(step, lo + 1e-11, hi - 1e-11)
        rho = np.where(np.isfinite(step), step, rho)
    g, dg = _exp_residual_grad(rho, r0, s0, t0)
    scale = 1.0 + np.linalg.norm(z, axis=1)
    converged = np.abs(g) <= 1e-11 * scale * (1.0 + np.abs(dg))
    out, rho_out = _exp_pick(z, rho, converged)
    return out, rho_out, ~converged


def project_exp(z: np.ndarray, rho_warm: np.ndarray | None = None) -> np.ndarray:
    """Projection of (n, 3) points onto the closed exponential cone.

    ``rho_warm``, when given, is a persistent per-triple array of previous
    boundary parameters (NaN where unknown); it is updated in place so
    consecutive projections of nearby points need only a few Newton steps.
    """
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    r, s, t = z[:, 0], z[:, 1], z[:, 2]
    out = np.empty_like(z)
    in_p = _exp_in_primal(r, s, t)
    in_pol = ~in_p & _exp_in_polar(r, s, t)
    flat = ~in_p & ~in_pol & (r <= 0.0) & (s <= 0.0)
    major = ~(in_p | in_pol | flat)
    out[in_p] = z[in_p]
    out[in_pol] = 0.0
    if np.any(flat):
        zf = z[flat]
        out[flat] = np.stack(
            [zf[:, 0], np.zeros(zf.shape[0]), np.maximum(zf[:, 2], 0.0)], axis=1
        )
    if np.any(major):
        zm = z[major]
        if rho_warm is None:
            out[major], _ = _exp_major_cold(zm)
        else:
            warm = rho_warm[major]
            usable = np.isfinite(warm)
            res = np.empty_like(zm)
            rho_new = np.full(zm.shape[0], np.nan)
            if np.any(usable):
                xw, rw, retry = _exp_major_warm(zm[usable], warm[usable])
                res[usable] = xw
                rho_new[usable] = rw
                if np.any(retry):
                    sub = np.where(usable)[0][retry]
                    res[sub], rho_new[sub] = _exp_major_cold(zm[sub])
            if np.any(~usable):
                res[~usable], rho_new[~usable] = _exp_major_cold(zm[~usable])
            out[major] = res
            rho_warm[:] = np.nan
            rho_warm[major] = rho_new
    elif rho_warm is not None:
        rho_warm[:] = np.nan
    return out


# ---------------------------------------------------------------------------


def project_cone(v: np.ndarray, cones: ConeSpec) -> np.ndarray:
    """Blockwise Euclidean projection onto the primal cone product."""
    v = np.asarray(v, dtype=float)
    if v.size != cones.dim:
        raise ValueError(f"vector length {v.size} does not match cone dimension {cones.dim}")
    out = np.empty_like(v)
    for block, sl in zip(cones.blocks, cones.slices()):
        seg = v[sl]
        if block.kind == "zero":
            out[sl] = 0.0
        elif block.kind == "nonneg":
            out[sl] = np.maximum(seg, 0.0)
        elif block.kind == "soc":
            out[sl] = _project_soc(seg)
        elif block.kind == "psd":
            out[sl] = _project_psd(seg, block.size)
        else:
            out[sl] = project_exp(seg).reshape(-1)
    return out


class DualConeProjector:
    """Stateful projector onto the dual cone product.

    Functionally identical to :func:`project_dual_cone`, but keeps the
    exponential-cone boundary parameters between calls so the solver's inner
    loop pays only a few Newton steps per projection.
    """

    def __init__(self, cones: ConeSpec):
        self.cones = cones
        self._slices = cones.slices()
        self._warm = {
            i: np.full(b.size, np.nan)
            for i, b in enumerate(cones.blocks)
            if b.kind == "exp"
        }

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for i, (block, sl) in enumerate(zip(self.cones.blocks, self._slices)):
            seg = v[sl]
            if block.kind == "zero":
                out[sl] = seg
            elif block.kind == "nonneg":
                out[sl] = np.maximum(seg, 0.0)
            elif block.kind == "soc":
                out[sl] = _project_soc(seg)
            elif block.kind == "psd":
                out[sl] = _project_psd(seg, block.size)
            else:
                # Moreau: Pi_{K*}(v) = v + Pi_K(-v)
                seg3 = seg.reshape(-1, 3)
                out[sl] = (seg3 + project_exp(-seg3, self._warm[i])).reshape(-1)
        return out


def project_dual_cone(v: np.ndarray, cones: ConeSpec) -> np.ndarray:
    """Projection onto the dual cone product (zero block -> free)."""
    v = np.asarray(v, dtype=float)
    return DualConeProjector(cones)(v)


def cone_contains(v: np.ndarray, cones: ConeSpec, tol: float = 1e-9) -> bool:
    """Membership check used by tests; tolerance is absolute."""
    return bool(np.linalg.norm(v - project_cone(v, cones)) <= tol * (1 + np.linalg.norm(v)))


def dual_cone_contains(v: np.ndarray, cones: ConeSpec, tol: float = 1e-9) -> bool:
    return bool(np.linalg.norm(v - project_dual_cone(v, cones)) <= tol * (1 + np.linalg.norm(v)))
