"""The three comparison methods, reduced to splitting form on the shared
engine, with their success criteria.

* sparse-plus-low-rank deconvolution: min lambda |S|_1 + |L|_* subject to
  S + L = A and 0 <= L <= 1 entrywise; S is eliminated (S = A - L) so the
  coupling holds exactly, and the solve alternates the elementwise prox
  (soft-threshold toward A, then box clip) with eigenvalue soft-thresholding.
  Success: the low-rank part equals the sum of planted block indicators for
  some lambda in the sweep.
* k-disjoint-clique relaxation: max <J, X> with row sums at most one
  (nonnegative slack block), trace k, zeros off the support, X PSD.
  Success target is the trace-normalized block pattern (the unnormalized
  pattern violates the row-sum constraint for blocks larger than one vertex);
  distances to both patterns are reported.
* spectrum-matching (Schur-Horn orbitope) relaxation: max <A, X> with
  X = size * Z1, Z0 + Z1 = I, trace Z1 = k, both PSD, zeros off the support.
  Requires equal block sizes.  Success: X equals the block pattern.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import (
    AndersonAccelerator,
    ConeBlock,
    ConicProblem,
    ConstraintRow,
    SolveOptions,
    project_psd_fast,
    solve_conic,
)
from .graphs import CliquePartition, Graph
from .symmat import frob_norm, symmetrize

__all__ = [
    "BaselineResult",
    "LambdaSweep",
    "solve_deconvolution",
    "solve_kdc",
    "solve_schurhorn",
    "run_baseline",
    "sweep_lambda",
    "block_pattern",
    "normalized_block_pattern",
]

#: shared success tolerance (relative Frobenius), matching the recovery
#: classifier's matrix tolerance for comparability
SUCCESS_TOL = 1e-3


def block_pattern(part: CliquePartition) -> np.ndarray:
    """Sum of block indicator outer products (ones on planted blocks)."""
    ind = part.indicator()
    return ind @ ind.T


def normalized_block_pattern(part: CliquePartition) -> np.ndarray:
    """Trace-normalized pattern: each block scaled by 1/|block|."""
    ind = part.indicator()
    sizes = np.asarray(part.sizes, dtype=float)
    return (ind / sizes) @ ind.T


@dataclass
class BaselineResult:
    method: str
    params: dict
    success: bool
    matrices: dict
    residuals: dict
    iterations: int
    converged: bool
    runtime: float

    def summary(self) -> dict:
        out = {
            "method": self.method,
            "params": self.params,
            "success": bool(self.success),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "runtime": float(self.runtime),
        }
        out["residuals"] = {k: float(v) for k, v in self.residuals.items()}
        return out


def _soft_toward(w: np.ndarray, a: np.ndarray, width: float) -> np.ndarray:
    """Elementwise prox of width * |a - x| at w."""
    return a + np.sign(w - a) * np.maximum(np.abs(w - a) - width, 0.0)


def _eig_soft(v: np.ndarray, width: float) -> np.ndarray:
    """Prox of width * nuclear norm for symmetric matrices."""
    lam, q = np.linalg.eigh(v)
    lam = np.sign(lam) * np.maximum(np.abs(lam) - width, 0.0)
    return symmetrize(q @ (lam[:, None] * q.T))


def solve_deconvolution(
    g: Graph,
    lam: float,
    eps: float = 1e-5,
    max_iter: int = 100_000,
    rho: float = 1.0,
    over_relax: float = 1.7,
    check_every: int = 25,
    accel_cutoff: int = 1500,
    warm_start: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Sparse-plus-low-rank split of the adjacency matrix at one lambda.

    Returns (S, L, info); S + L = A holds exactly and L is exactly inside the
    box.  info carries residuals, iterations, convergence, objective, and the
    final fixed-point state (reusable as warm start for a nearby lambda).
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    n = g.n
    a = g.adjacency()
    v = a.copy() if warm_start is None else warm_start.copy()
    aa: Optional[AndersonAccelerator] = AndersonAccelerator()

    l_box = v
    y = v
    primal = dual = gap = np.inf
    prev_obj = np.inf
    converged = False
    it = 0
    y_prev = v
    for it in range(1, max_iter + 1):
        y_prev = y
        y = _eig_soft(symmetrize(v), 1.0 / rho)  # nuclear-norm prox
        w = 2.0 * y - v
        l_box = np.clip(_soft_toward(w, a, lam / rho), 0.0, 1.0)
        g_res = over_relax * (l_box - y)

        if it % check_every == 0 or it == max_iter:
            primal_abs = frob_norm(l_box - y)
            dual_abs = rho * frob_norm(y - y_prev)
            primal = primal_abs / max(1.0, frob_norm(l_box))
            dual = dual_abs / max(1.0, rho * frob_norm(v - y))
            obj = lam * float(np.abs(a - l_box).sum()) + float(
                np.abs(np.linalg.eigvalsh(y)).sum()
            )
            gap = abs(obj - prev_obj) / max(1.0, abs(obj))
            prev_obj = obj
            if primal <= eps and dual <= eps and gap <= eps:
                converged = True
                break
            if aa is not None and it >= accel_cutoff:
                aa = None

        v = aa.step(v, g_res) if aa is not None else v + g_res

    s = a - l_box
    info = {
        "objective": prev_obj,
        "primal_residual": primal,
        "dual_residual": dual,
        "objective_gap": gap,
        "iterations": it,
        "converged": converged,
        "state": v,
    }
    return s, l_box, info


def _kdc_problem(g: Graph, k: int) -> ConicProblem:
    n = g.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    adj = g.adjacency(dtype=bool)
    mask = ~adj
    np.fill_diagonal(mask, False)  # forced zeros: off-diagonal non-edges

    rows = [
        ConstraintRow(
            entries=((0, np.arange(n) * n + np.arange(n), np.ones(n)),),
            rhs=float(k),
        )
    ]
    nbrs = g.neighbor_sets()
    for i in range(n):
        js = np.asarray(sorted(nbrs[i]), dtype=int)
        idx = [i * n + i]
        coef = [1.0]
        if len(js):
            idx.extend(i * n + js)
            coef.extend([0.5] * len(js))
            idx.extend(js * n + i)
            coef.extend([0.5] * len(js))
        rows.append(
            ConstraintRow(
                entries=(
                    (0, np.asarray(idx), np.asarray(coef)),
                    (1, np.asarray([i]), np.asarray([1.0])),
                ),
                rhs=1.0,
            )
        )
    return ConicProblem(
        blocks=(ConeBlock("psd", n), ConeBlock("nonneg", n)),
        objective=(-np.ones((n, n)), np.zeros(n)),
        rows=tuple(rows),
        zero_masks=(mask, None),
    )


def solve_kdc(
    g: Graph, k: int, eps: float = 1e-5, max_iter: int = 100_000, rho: float = 1.0
) -> tuple[np.ndarray, dict]:
    """Solve the k-disjoint-clique relaxation; returns (X, info)."""
    problem = _kdc_problem(g, k)
    opts = SolveOptions(eps=eps, max_iter=max_iter, rho=rho)
    sol = solve_conic(problem, opts)
    x = sol.x_blocks[0]
    info = {
        "objective": -sol.objective,  # engine minimizes -<J, X>
        "slack_min": float(sol.x_blocks[1].min()),
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "objective_gap": sol.objective_gap,
        "iterations": sol.iterations,
        "converged": sol.converged,
    }
    return x, info


def solve_schurhorn(
    g: Graph,
    size: int,
    k: int,
    eps: float = 1e-5,
    max_iter: int = 100_000,
    rho: float = 1.0,
    over_relax: float = 1.7,
    check_every: int = 25,
    accel_cutoff: int = 1500,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Spectrum-matching relaxation for k equal blocks of the given size.

    Returns (X, Z0, Z1, info) with X = size * Z1 and Z0 = I - Z1 exactly on
    the affine side.  Rejects size * k != |V|.
    """
    n = g.n
    if size * k != n:
        raise ValueError(
            f"the formulation needs k equal blocks: size*k = {size * k} != |V| = {n}"
        )
    adj = g.adjacency()
    mask = ~g.adjacency(dtype=bool)
    np.fill_diagonal(mask, False)
    eye = np.eye(n)
    dflat = np.arange(n) * n + np.arange(n)

    def affine(w: np.ndarray) -> np.ndarray:
        wf = w.ravel()
        wf[mask.ravel()] = 0.0
        wf[dflat] += (k - wf[dflat].sum()) / n
        return w

    # stacked fixed-point state: v[0] drives Z1, v[1] drives Z0
    v = np.stack([eye * (k / n), eye * (1.0 - k / n)])
    aa: Optional[AndersonAccelerator] = AndersonAccelerator()

    z1 = v[0]
    y1 = v[0]
    y0 = v[1]
    primal = dual = gap = np.inf
    prev_obj = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y1_prev, y0_prev = y1, y0
        y1 = project_psd_fast(symmetrize(v[0]))
        y0 = project_psd_fast(symmetrize(v[1]))
        u1 = v[0] - y1
        u0 = v[1] - y0
        target = ((y1 - u1) + (eye - (y0 - u0)) + (size / rho) * adj) / 2.0
        z1 = affine(target)
        z0 = eye - z1
        g_res = over_relax * np.stack([z1 - y1, z0 - y0])

        if it % check_every == 0 or it == max_iter:
            primal_abs = np.sqrt(frob_norm(z1 - y1) ** 2 + frob_norm(z0 - y0) ** 2)
            dual_abs = rho * np.sqrt(
                frob_norm(y1 - y1_prev) ** 2 + frob_norm(y0 - y0_prev) ** 2
            )
            scale = max(1.0, np.sqrt(frob_norm(z1) ** 2 + frob_norm(z0) ** 2))
            primal = primal_abs / scale
            dual = dual_abs / max(
                1.0, rho * np.sqrt(frob_norm(u1) ** 2 + frob_norm(u0) ** 2)
            )
            obj = size * float(np.sum(adj * z1))
            gap = abs(obj - prev_obj) / max(1.0, abs(obj))
            prev_obj = obj
            if primal <= eps and dual <= eps and gap <= eps:
                converged = True
                break
            if aa is not None and it >= accel_cutoff:
                aa = None

        v = aa.step(v, g_res) if aa is not None else v + g_res

    x = size * z1
    info = {
        "objective": prev_obj,
        "primal_residual": primal,
        "dual_residual": dual,
        "objective_gap": gap,
        "iterations": it,
        "converged": converged,
    }
    return x, eye - z1, z1, info


def run_baseline(
    g: Graph,
    part: CliquePartition,
    method: str,
    eps: float = 1e-5,
    max_iter: int = 100_000,
    lam: Optional[float] = None,
    warm_start: Optional[np.ndarray] = None,
) -> BaselineResult:
    """Solve one baseline against the planted partition's success target."""
    t0 = time.perf_counter()
    target = block_pattern(part)
    target_norm = frob_norm(target)
    if method == "deconvolution":
        if lam is None:
            raise ValueError("deconvolution needs lambda")
        s_mat, l_mat, info = solve_deconvolution(
            g, lam, eps=eps, max_iter=max_iter, warm_start=warm_start
        )
        dist = frob_norm(l_mat - target)
        success = info["converged"] and dist <= SUCCESS_TOL * target_norm
        matrices = {"S": s_mat, "L": l_mat, "state": info.pop("state")}
        residuals = {"target_distance": dist, **{k: v for k, v in info.items() if k not in ("iterations", "converged")}}
        return BaselineResult(
            "deconvolution",
            {"lambda": lam},
            success,
            matrices,
            residuals,
            info["iterations"],
            info["converged"],
            time.perf_counter() - t0,
        )
    if method == "kdc":
        k = part.k
        x, info = solve_kdc(g, k, eps=eps, max_iter=max_iter)
        norm_target = normalized_block_pattern(part)
        dist_norm = frob_norm(x - norm_target)
        dist_unnorm = frob_norm(x - target)
        success = info["converged"] and dist_norm <= SUCCESS_TOL * frob_norm(norm_target)
        residuals = {
            "target_distance_normalized": dist_norm,
            "target_distance_unnormalized": dist_unnorm,
            **{k_: v for k_, v in info.items() if k_ not in ("iterations", "converged")},
        }
        return BaselineResult(
            "kdc",
            {"k": k},
            success,
            {"X": x},
            residuals,
            info["iterations"],
            info["converged"],
            time.perf_counter() - t0,
        )
    if method == "schurhorn":
        sizes = set(part.sizes)
        if len(sizes) != 1:
            raise ValueError("spectrum-matching baseline needs equal block sizes")
        size = sizes.pop()
        x, z0, z1, info = solve_schurhorn(g, size, part.k, eps=eps, max_iter=max_iter)
        dist = frob_norm(x - target)
        dist_norm = frob_norm(z1 - normalized_block_pattern(part))
        success = info["converged"] and dist <= SUCCESS_TOL * target_norm
        residuals = {
            "target_distance_unnormalized": dist,
            "target_distance_normalized": dist_norm,
            **{k_: v for k_, v in info.items() if k_ not in ("iterations", "converged")},
        }
        return BaselineResult(
            "schurhorn",
            {"size": size, "k": part.k},
            success,
            {"X": x, "Z0": z0, "Z1": z1},
            residuals,
            info["iterations"],
            info["converged"],
            time.perf_counter() - t0,
        )
    raise ValueError(f"unknown baseline method {method!r}")


@dataclass
class LambdaSweep:
    results: list
    success: bool
    best: Optional[BaselineResult]


def sweep_lambda(
    g: Graph,
    part: CliquePartition,
    grid: Sequence[float] = tuple(np.round(np.arange(0.0, 1.01, 0.1), 10)),
    eps: float = 1e-5,
    max_iter: int = 100_000,
) -> LambdaSweep:
    """Run the deconvolution baseline for every lambda in the grid.

    The sweep succeeds if any lambda recovers the planted pattern; every
    per-lambda outcome is recorded.  Consecutive solves warm-start from the
    previous lambda's fixed-point state (deterministic, order-fixed).
    """
    if len(grid) == 0:
        raise ValueError("lambda grid must be non-empty")
    results = []
    best: Optional[BaselineResult] = None
    state = None
    for lam in grid:
        res = run_baseline(
            g, part, "deconvolution", eps=eps, max_iter=max_iter, lam=float(lam), warm_start=state
        )
        state = res.matrices.pop("state")
        results.append(res)
        if res.success:
            dist = res.residuals["target_distance"]
            if best is None or dist < best.residuals["target_distance"]:
                best = res
    return LambdaSweep(results=results, success=best is not None, best=best)
