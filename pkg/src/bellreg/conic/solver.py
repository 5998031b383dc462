"""First-order conic solver.

Operator splitting on the homogeneous self-dual embedding: each iteration
solves one quasidefinite linear system (factorized once) and projects onto
the cone product.  Anderson acceleration with a divergence safeguard speeds
up the tail; diagonal (Ruiz) equilibration with cone-block-uniform row
scaling keeps badly scaled moment-matrix constraints tractable.  The
embedding also yields Farkas certificates for infeasible problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import ConeSpec, DualConeProjector
from .problem import ConicProblem, ConicSolution

__all__ = ["SolverOptions", "solve_conic"]


@dataclass(frozen=True)
class SolverOptions:
    eps_abs: float = 1e-9
    eps_rel: float = 1e-9
    eps_infeas: float = 1e-10
    max_iters: int = 100_000
    seed: int = 0
    init_noise: float = 0.0
    over_relax: float = 1.5
    aa_memory: int = 30
    check_interval: int = 25
    scale: bool = True
    ruiz_iters: int = 10
    verbose: bool = False


def _row_groups(cones: ConeSpec) -> np.ndarray:
    """Group id per row; rows in one group share a single scale factor."""
    groups = np.empty(cones.dim, dtype=np.intp)
    gid = 0
    pos = 0
    for block in cones.blocks:
        if block.kind in ("zero", "nonneg"):
            groups[pos : pos + block.dim] = np.arange(gid, gid + block.dim)
            gid += block.dim
        elif block.kind == "exp":
            for _ in range(block.size):
                groups[pos : pos + 3] = gid
                pos += 3
                gid += 1
            continue
        else:
            groups[pos : pos + block.dim] = gid
            gid += 1
        pos += block.dim
    return groups


def _equilibrate(A: sp.csc_matrix, cones: ConeSpec, iters: int) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray]:
    """Ruiz equilibration; returns (scaled A, row scale D, col scale E)."""
    m, n = A.shape
    groups = _row_groups(cones)
    n_groups = int(groups.max()) + 1 if m else 0
    D = np.ones(m)
    E = np.ones(n)
    As = A.copy()
    for _ in range(iters):
        As_abs = abs(As.tocsc())
        col_max = np.asarray(As_abs.max(axis=0).todense()).ravel()
        row_max = np.asarray(As_abs.max(axis=1).todense()).ravel()
        grp_max = np.zeros(n_groups)
        np.maximum.at(grp_max, groups, row_max)
        row_max = grp_max[groups]
        dr = 1.0 / np.sqrt(np.where(row_max > 0, row_max, 1.0))
        dc = 1.0 / np.sqrt(np.where(col_max > 0, col_max, 1.0))
        As = sp.diags(dr) @ As @ sp.diags(dc)
        D *= dr
        E *= dc
    return As.tocsc(), D, E


class _Workspace:
    """Factorized linear system for the embedding."""

    def __init__(self, A: sp.csc_matrix, b: np.ndarray, c: np.ndarray):
        m, n = A.shape
        self.m, self.n = m, n
        K = sp.bmat(
            [[sp.eye(n), A.T], [A, -sp.eye(m)]], format="csc"
        )
        self.lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
        self.h = np.concatenate([c, b])
        self.g = self._solve_M(self.h)
        self.denom = 1.0 + self.h @ self.g
        self.c, self.b = c, b

    def _solve_M(self, w: np.ndarray) -> np.ndarray:
        rhs = w.copy()
        rhs[self.n :] *= -1.0
        return self.lu.solve(rhs)

    def solve_embedding(self, w: np.ndarray) -> np.ndarray:
        """Solve (I + Q) u~ = w for the skew embedding matrix Q."""
        zeta = self._solve_M(w[:-1])
        tau = (w[-1] + self.h @ zeta) / self.denom
        out = np.empty_like(w)
        out[:-1] = zeta - tau * self.g
        out[-1] = tau
        return out


def _aa_candidate(hist_h: list[np.ndarray], hist_r: list[np.ndarray]) -> np.ndarray | None:
    """Type-II Anderson extrapolation from the stored residual history."""
    k = len(hist_r)
    if k < 2:
        return None
    dR = np.stack([hist_r[i + 1] - hist_r[i] for i in range(k - 1)], axis=1)
    dH = np.stack([hist_h[i + 1] - hist_h[i] for i in range(k - 1)], axis=1)
    rk = hist_r[-1]
    G = dR.T @ dR
    G += 1e-12 * (np.trace(G) + 1.0) * np.eye(G.shape[0])
    try:
        gamma = np.linalg.solve(G, dR.T @ rk)
    except np.linalg.LinAlgError:
        return None
    return hist_h[-1] + rk - (dH + dR) @ gamma


def solve_conic(prob: ConicProblem, opts: SolverOptions | None = None) -> ConicSolution:
    """Solve a standard-form cone program.

    Deterministic: identical problem data and options reproduce the iterate
    sequence bit for bit.  ``opts.init_noise`` (with ``opts.seed``) perturbs
    the starting point, which is how the uniqueness checks restart the
    solver.
    """
    opts = opts or SolverOptions()
    A0, b0, c0 = prob.A, prob.b, prob.c
    m, n = A0.shape

    if opts.scale:
        A, D, E = _equilibrate(A0, prob.cones, opts.ruiz_iters)
        b = D * b0
        c = E * c0
    else:
        A, D, E = A0, np.ones(m), np.ones(n)
        b, c = b0.copy(), c0.copy()

    ws = _Workspace(A, b, c)
    dim = n + m + 1

    u = np.zeros(dim)
    u[-1] = 1.0
    v = np.zeros(dim)
    if opts.init_noise > 0.0:
        rng = np.random.default_rng(opts.seed)
        u += opts.init_noise * rng.standard_normal(dim)
        v += opts.init_noise * rng.standard_normal(dim)

    dual_proj = DualConeProjector(prob.cones)

    def project_C(w: np.ndarray) -> np.ndarray:
        out = w.copy()
        out[n:-1] = dual_proj(w[n:-1])
        out[-1] = max(w[-1], 0.0)
        return out

    def step(uu: np.ndarray, vv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ut = ws.solve_embedding(uu + vv)
        ut = opts.over_relax * ut + (1.0 - opts.over_relax) * uu
        un = project_C(ut - vv)
        return un, vv - ut + un

    def unscaled(uu: np.ndarray, vv: np.ndarray):
        tau = uu[-1]
        x = E * uu[:n]
        y = D * uu[n:-1]
        s = vv[n:-1] / D
        return x, y, s, tau

    norm_b = np.linalg.norm(b0)
    norm_c = np.linalg.norm(c0)
    eps_pri = opts.eps_abs + opts.eps_rel * (1.0 + norm_b)
    eps_dua = opts.eps_abs + opts.eps_rel * (1.0 + norm_c)

    def residuals(x, y, s, tau):
        xt, yt, st = x / tau, y / tau, s / tau
        pres = np.linalg.norm(A0 @ xt + st - b0)
        dres = np.linalg.norm(A0.T @ yt + c0)
        cx, by = c0 @ xt, b0 @ yt
        gap = abs(cx + by) / (1.0 + abs(cx) + abs(by))
        return pres, dres, gap, cx

    def certificates(x, y, s):
        by = b0 @ y
        if by < 0:
            yn = y / (-by)
            if np.linalg.norm(A0.T @ yn) <= opts.eps_infeas:
                return "primal_infeasible", yn
        cx = c0 @ x
        if cx < 0:
            xn = x / (-cx)
            sn = s / (-cx)
            if np.linalg.norm(A0 @ xn + sn) <= opts.eps_infeas:
                return "dual_infeasible", (xn, sn)
        return None, None

    hist_h: list[np.ndarray] = []
    hist_r: list[np.ndarray] = []
    best = None
    best_score = np.inf
    stall_checks = 0

    k = 0
    status = "max_iters"
    while k < opts.max_iters:
        un, vn = step(u, v)
        if not (np.isfinite(un).all() and np.isfinite(vn).all()):
            status = "numerical"
            break
        h = np.concatenate([u, v])
        hn = np.concatenate([un, vn])
        hist_h.append(h)
        hist_r.append(hn - h)
        if len(hist_h) > opts.aa_memory:
            hist_h.pop(0)
            hist_r.pop(0)

        check = (k % opts.check_interval == 0) or k == opts.max_iters - 1
        if check:
            x, y, s, tau = unscaled(un, vn)
            scale_u = np.linalg.norm(un) + 1e-30
            if tau > 1e-9 * scale_u:
                pres, dres, gap, _ = residuals(x, y, s, tau)
                score = max(pres / (1.0 + norm_b), dres / (1.0 + norm_c), gap)
                if score < best_score:
                    best_score = score
                    best = (un.copy(), vn.copy())
                    stall_checks = 0
                else:
                    stall_checks += 1
                if pres <= eps_pri and dres <= eps_dua and gap <= opts.eps_abs + opts.eps_rel:
                    u, v = un, vn
                    status = "optimal"
                    k += 1
                    break
            else:
                kind, cert = certificates(x, y, s)
                if kind is not None:
                    xt, yt, st = (np.zeros(n), cert, np.zeros(m)) if kind == "primal_infeasible" else (cert[0], np.zeros(m), cert[1])
                    return ConicSolution(
                        kind, xt, yt, st, float("nan"), float("nan"), float("nan"),
                        float("nan"), k + 1,
                        {"scaled": opts.scale, "tau": float(tau)},
                    )
            # also probe certificates away from tau ~ 0; cheap and harmless
            if k % (10 * opts.check_interval) == 0 and k > 0:
                kind, cert = certificates(y=y, x=x, s=s)
                if kind is not None:
                    xt, yt, st = (np.zeros(n), cert, np.zeros(m)) if kind == "primal_infeasible" else (cert[0], np.zeros(m), cert[1])
                    return ConicSolution(
                        kind, xt, yt, st, float("nan"), float("nan"), float("nan"),
                        float("nan"), k + 1,
                        {"scaled": opts.scale, "tau": float(tau)},
                    )
            if stall_checks > 40 and best is not None:
                # diverging under acceleration: restart from the best state
                u, v = best[0].copy(), best[1].copy()
                hist_h.clear()
                hist_r.clear()
                stall_checks = 0
                k += 1
                continue

        cand = _aa_candidate(hist_h, hist_r)
        if cand is not None and np.isfinite(cand).all():
            u, v = cand[:dim], cand[dim:]
        else:
            u, v = un, vn

        norm_h = np.linalg.norm(u) + np.linalg.norm(v)
        if norm_h > 1e10 or (norm_h < 1e-10 and k > 10):
            scale = np.sqrt(dim) / (norm_h + 1e-300)
            u, v = u * scale, v * scale
            hist_h.clear()
            hist_r.clear()
        k += 1

    if status != "optimal" and best is not None and status != "numerical":
        u, v = best

    x, y, s, tau = unscaled(u, v)
    if tau <= 1e-12 * (np.linalg.norm(u) + 1e-30):
        kind, cert = certificates(x, y, s)
        if kind is not None:
            xt, yt, st = (np.zeros(n), cert, np.zeros(m)) if kind == "primal_infeasible" else (cert[0], np.zeros(m), cert[1])
            return ConicSolution(
                kind, xt, yt, st, float("nan"), float("nan"), float("nan"),
                float("nan"), k, {"scaled": opts.scale, "tau": float(tau)},
            )
        return ConicSolution(
            "numerical", x, y, s, float("nan"), float("nan"), float("nan"),
            float("nan"), k, {"reason": "tau collapsed without certificate"},
        )
    xt, yt, st = x / tau, y / tau, s / tau
    pres, dres, gap, cx = residuals(x, y, s, tau)
    return ConicSolution(
        status, xt, yt, st, float(cx),
        float(pres / (1.0 + norm_b)), float(dres / (1.0 + norm_c)), float(gap), k,
        {"scaled": opts.scale, "tau": float(tau)},
    )
