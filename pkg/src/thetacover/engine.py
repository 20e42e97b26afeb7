"""First-order operator-splitting engine for standard-form conic problems.

The engine alternates an affine projection (closed form: forced-zero entry
masks plus a small precomputed least-squares correction for the equality
rows) with a cone projection (eigenvalue clipping per PSD block, clamping
per nonnegative block), with over-relaxation and residual-balancing penalty
adaptation.  Convergence is declared when the primal residual, the dual
residual, and the normalized objective gap all drop below eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ConeBlock",
    "ConstraintRow",
    "ConicProblem",
    "ConicSolution",
    "SolveOptions",
    "solve_conic",
    "project_psd_fast",
    "AndersonAccelerator",
]


def project_psd_fast(v: np.ndarray) -> np.ndarray:
    """PSD projection by eigenvalue clipping, reconstructing from the smaller
    of the two eigenvalue groups."""
    lam, q = np.linalg.eigh(v)
    neg = lam < 0.0
    k = int(neg.sum())
    if k == 0:
        return v
    if k <= lam.size - k:
        qn = q[:, neg]
        out = v - qn @ (lam[neg][:, None] * qn.T)
    else:
        qp = q[:, ~neg]
        out = qp @ (lam[~neg][:, None] * qp.T)
    return (out + out.T) / 2.0


class AndersonAccelerator:
    """Safeguarded type-II Anderson acceleration for fixed-point iterations.

    Given the current iterate v and residual g = T(v) - v, `step` returns the
    next iterate.  A rolling window of difference pairs feeds a small
    regularized least-squares problem; the memory is dropped (falling back to
    the plain step) whenever the residual grows well past the best seen since
    the last restart, or the extrapolation goes non-finite.
    """

    def __init__(self, memory: int = 10, reg: float = 1e-10, growth: float = 5.0):
        self.memory = memory
        self.reg = reg
        self.growth = growth
        self._dv = None  # ring buffers, allocated on first use
        self._dg = None
        self.reset()

    def reset(self) -> None:
        self._v_prev = None
        self._g_prev = None
        self._count = 0
        self._pos = 0
        self._best = np.inf

    def _buffers(self, dim: int):
        if self._dv is None or self._dv.shape[1] != dim:
            self._dv = np.empty((self.memory, dim))
            self._dg = np.empty((self.memory, dim))
        return self._dv, self._dg

    def step(self, v: np.ndarray, g: np.ndarray) -> np.ndarray:
        shape = v.shape
        v = v.ravel()
        g = g.ravel()
        res = float(np.linalg.norm(g))
        if not np.isfinite(res) or res > self.growth * self._best:
            self.reset()
        self._best = min(self._best, res)

        dv, dg = self._buffers(v.size)
        if self._v_prev is not None:
            np.subtract(v, self._v_prev, out=dv[self._pos])
            np.subtract(g, self._g_prev, out=dg[self._pos])
            self._pos = (self._pos + 1) % self.memory
            self._count = min(self._count + 1, self.memory)
            self._v_prev[:] = v
            self._g_prev[:] = g
        else:
            self._v_prev = v.copy()
            self._g_prev = g.copy()

        if self._count == 0:
            return (v + g).reshape(shape)
        # order of the difference pairs does not matter for the solve
        dgm = dg[: self._count]
        dvm = dv[: self._count]
        gram = dgm @ dgm.T
        gram[np.diag_indices_from(gram)] += self.reg * max(float(np.trace(gram)), 1e-300)
        try:
            gamma = np.linalg.solve(gram, dgm @ g)
        except np.linalg.LinAlgError:
            self.reset()
            return (v + g).reshape(shape)
        candidate = v + g - gamma @ dvm - gamma @ dgm
        if not np.isfinite(candidate).all():
            self.reset()
            return (v + g).reshape(shape)
        return candidate.reshape(shape)


@dataclass(frozen=True)
class ConeBlock:
    """One variable block: a PSD matrix of the given order or a nonnegative
    vector of the given length."""

    kind: str  # "psd" | "nonneg"
    order: int

    def __post_init__(self):
        if self.kind not in ("psd", "nonneg"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("cone block must have positive size")

    @property
    def shape(self) -> tuple:
        return (self.order, self.order) if self.kind == "psd" else (self.order,)

    @property
    def size(self) -> int:
        return self.order * self.order if self.kind == "psd" else self.order


@dataclass(frozen=True)
class ConstraintRow:
    """One equality functional sum_b <coeffs_b, x_b> = rhs.

    entries: list of (block index, flat index array, coefficient array).
    For PSD blocks the implied gradient matrix must be symmetric (use half
    weights on the two mirror positions of an off-diagonal entry).
    """

    entries: tuple
    rhs: float


@dataclass(frozen=True)
class ConicProblem:
    """minimize sum_b <c_b, x_b> over the cone blocks subject to the forced
    zeros and the equality rows."""

    blocks: tuple
    objective: tuple  # one array per block, same shape
    rows: tuple = ()
    zero_masks: tuple = ()  # per block: bool array (True = forced zero) or None

    def __post_init__(self):
        if len(self.objective) != len(self.blocks):
            raise ValueError("objective must have one array per block")
        for blk, c in zip(self.blocks, self.objective):
            if np.shape(c) != blk.shape:
                raise ValueError(
                    f"objective shape {np.shape(c)} does not match block {blk.shape}"
                )
        if self.zero_masks and len(self.zero_masks) != len(self.blocks):
            raise ValueError("zero_masks must have one entry per block")


@dataclass
class SolveOptions:
    eps: float = 1e-7
    max_iter: int = 100_000
    rho: float = 1.0
    over_relax: float = 1.7
    check_every: int = 25
    adapt_rho: bool = True
    accelerate: bool = True
    accel_cutoff: int = 1500
    verbose: bool = False
    log: Callable[[str], None] = print


@dataclass
class ConicSolution:
    x_blocks: list  # affine-side iterates (masks and equalities hold exactly)
    y_blocks: list  # cone-side iterates (cone membership holds exactly)
    u_blocks: list  # scaled dual iterates
    objective: float
    primal_residual: float
    dual_residual: float
    objective_gap: float
    iterations: int
    converged: bool
    rho: float


class _AffineStep:
    """Masks + least-squares correction onto the equality rows."""

    def __init__(self, problem: ConicProblem):
        self.blocks = problem.blocks
        self.masks = list(problem.zero_masks) if problem.zero_masks else [None] * len(
            problem.blocks
        )
        self.offsets = np.cumsum([0] + [b.size for b in problem.blocks])
        dim = self.offsets[-1]
        rows = problem.rows
        self.rhs = np.array([r.rhs for r in rows], dtype=float)
        self.r_mat = np.zeros((len(rows), dim)) if rows else None
        for r_i, row in enumerate(rows):
            for b_i, flat_idx, coeffs in row.entries:
                base = self.offsets[b_i]
                self.r_mat[r_i, base + np.asarray(flat_idx)] = coeffs
                mask = self.masks[b_i]
                if mask is not None and np.any(mask.ravel()[np.asarray(flat_idx)]):
                    raise ValueError("equality row touches a forced-zero position")
        if self.r_mat is not None:
            gram = self.r_mat @ self.r_mat.T
            self.gram_chol = np.linalg.cholesky(gram)

    def __call__(self, w_blocks: list) -> list:
        out = []
        for w, mask in zip(w_blocks, self.masks):
            w = w.copy()
            if mask is not None:
                w[mask] = 0.0
            out.append(w)
        if self.r_mat is not None:
            flat = np.concatenate([w.ravel() for w in out])
            resid = self.r_mat @ flat - self.rhs
            tmp = np.linalg.solve(self.gram_chol, resid)
            mult = np.linalg.solve(self.gram_chol.T, tmp)
            flat -= self.r_mat.T @ mult
            for b_i, blk in enumerate(self.blocks):
                seg = flat[self.offsets[b_i] : self.offsets[b_i + 1]]
                out[b_i] = seg.reshape(blk.shape)
        return out


def _cone_step(blocks, v_blocks):
    out = []
    for blk, v in zip(blocks, v_blocks):
        if blk.kind == "psd":
            out.append(project_psd_fast((v + v.T) / 2.0))
        else:
            out.append(np.maximum(v, 0.0))
    return out


def _split(flat: np.ndarray, blocks) -> list:
    out = []
    offset = 0
    for b in blocks:
        out.append(flat[offset : offset + b.size].reshape(b.shape))
        offset += b.size
    return out


def solve_conic(problem: ConicProblem, opts: Optional[SolveOptions] = None) -> ConicSolution:
    """Run the splitting until the three convergence measures are below eps.

    The affine-side iterate satisfies the masks and equality rows exactly at
    every iteration; the cone-side iterate is exactly cone-feasible.  Their
    disagreement is the primal residual; the reported objective gap is the
    normalized objective change across check windows.  Non-convergence
    within max_iter returns the best iterate with converged=False.
    """
    opts = opts or SolveOptions()
    blocks = problem.blocks
    affine = _AffineStep(problem)
    rho = opts.rho
    alpha = opts.over_relax
    aa = AndersonAccelerator() if opts.accelerate else None

    dim = sum(b.size for b in blocks)
    v = np.zeros(dim)
    x = y = u = None

    def objective(v_blocks) -> float:
        return float(sum(np.sum(c * vb) for c, vb in zip(problem.objective, v_blocks)))

    prev_obj = np.inf
    primal = dual = gap = np.inf
    it = 0
    converged = False
    y_prev_flat = np.zeros(dim)
    for it in range(1, opts.max_iter + 1):
        y = _cone_step(blocks, _split(v, blocks))
        y_flat = np.concatenate([b.ravel() for b in y])
        u_flat = v - y_flat
        u = _split(u_flat, blocks)
        w = [yb - ub - cb / rho for yb, ub, cb in zip(y, u, problem.objective)]
        x = affine(w)
        x_flat = np.concatenate([b.ravel() for b in x])
        g = alpha * (x_flat - y_flat)

        if it % opts.check_every == 0 or it == opts.max_iter:
            primal_abs = float(np.linalg.norm(x_flat - y_flat))
            dual_abs = rho * float(np.linalg.norm(y_flat - y_prev_flat))
            primal = primal_abs / max(1.0, float(np.linalg.norm(x_flat)))
            dual = dual_abs / max(1.0, rho * float(np.linalg.norm(u_flat)))
            obj = objective(x)
            gap = abs(obj - prev_obj) / max(1.0, abs(obj))
            prev_obj = obj
            if opts.verbose:
                opts.log(
                    f"iter={it} primal={primal:.3e} dual={dual:.3e} "
                    f"obj_gap={gap:.3e} rho={rho:.3e}"
                )
            if primal <= opts.eps and dual <= opts.eps and gap <= opts.eps:
                converged = True
                break
            if aa is not None and it >= opts.accel_cutoff:
                aa = None
            if opts.adapt_rho:
                new_rho = rho
                if primal_abs > 10.0 * dual_abs and rho < 1e8:
                    new_rho = rho * 2.0
                elif dual_abs > 10.0 * primal_abs and rho > 1e-6:
                    new_rho = rho / 2.0
                if new_rho != rho:
                    u_flat *= rho / new_rho
                    rho = new_rho
                    v = y_flat + u_flat
                    if aa is not None:
                        aa.reset()
                    y_prev_flat = y_flat
                    continue

        y_prev_flat = y_flat
        v = aa.step(v, g) if aa is not None else v + g

    return ConicSolution(
        x_blocks=x,
        y_blocks=y,
        u_blocks=u,
        objective=objective(x),
        primal_residual=primal,
        dual_residual=dual,
        objective_gap=gap,
        iterations=it,
        converged=converged,
        rho=rho,
    )
