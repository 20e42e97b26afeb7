"""Dual-certificate construction and the deterministic uniqueness pipeline.

For a clique partition {C_l} of a graph this module builds the canonical
matrices of the planted solution (the optimal edge-weight matrix, its PSD
slack, and the block-structured dual matrix), projects the dual matrix onto
the constraint intersection by alternating projections, and verifies the
resulting certificate: PSD-ness, vanishing on edges, complementarity with the
planted slack, the strict-complementarity rank condition, and extremality of
the planted point.  A report that passes all checks witnesses that the
planted solution is the unique optimum of the theta program.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .graphs import (
    CliquePartition,
    Graph,
    recovery_threshold_fraction,
    scc_parameter,
)
from .symmat import CERT_TOL, eigvals_sym, frob_norm, symmetrize, stack_rank

__all__ = [
    "CanonicalMatrices",
    "CertificateReport",
    "ProjectionResult",
    "IncoherenceSample",
    "build_canonical",
    "balanced_basis",
    "project_certificate",
    "verify_certificate",
    "extremality_test",
    "incoherence_sample",
    "deterministic_recovery",
    "dump_matrix_csv",
]


@dataclass(frozen=True)
class CanonicalMatrices:
    """The planted solution's matrices for a partition with k blocks.

    edge_weights: k * (sum_l 1_C 1_C^T - I); the optimal weight matrix.
    slack:        k*I + edge_weights - J; PSD with rank k-1.
    dual_block:   block matrix with I/|C_l| diagonal blocks and constant
                  1/(|C_i||C_j|) off-diagonal blocks; PSD, complementary to
                  `slack`, rank n-k+1.
    inv_sizes:    vector with 1/|C_l| repeated for the vertices of each block.
    """

    edge_weights: np.ndarray
    slack: np.ndarray
    dual_block: np.ndarray
    inv_sizes: np.ndarray


def build_canonical(part: CliquePartition) -> CanonicalMatrices:
    """Construct the canonical matrices; construction is self-checking."""
    n, k = part.n, part.k
    ind = part.indicator()
    sizes = np.asarray(part.sizes, dtype=float)

    eye = np.eye(n)
    ones = np.ones((n, n))
    same_block = ind @ ind.T
    a = k * (same_block - eye)
    x = k * eye + a - ones

    g = ind @ (1.0 / sizes)
    z = np.diag(g) + np.outer(g, g) - (ind / (sizes**2)) @ ind.T
    z = symmetrize(z)

    # rank-one form of the slack matrix must agree with the affine form
    centered = k * ind - np.ones((n, k))
    x_alt = (centered @ centered.T) / k
    if not np.allclose(x, x_alt, atol=1e-12 * max(1.0, k * k)):
        raise AssertionError("canonical slack matrix failed its self check")
    return CanonicalMatrices(a, symmetrize(x), z, g)


def balanced_basis(part: CliquePartition) -> np.ndarray:
    """Orthonormal basis (columns) of the balanced subspace.

    The balanced subspace is the set of vectors whose inner products against
    all block indicators agree; it has dimension n - k + 1, is the kernel of
    the canonical slack matrix and the range of the canonical dual matrix.
    """
    n, k = part.n, part.k
    if k == 1:
        return np.eye(n)
    ind = part.indicator()
    diffs = (ind[:, 0][:, None] - ind[:, 1:]).T  # (k-1) x n, rows 1_C1 - 1_Cl
    _, _, vh = np.linalg.svd(diffs, full_matrices=True)
    return vh[k - 1 :].T


def _forbidden_mask(graph: Graph, part: CliquePartition) -> np.ndarray:
    """Positions a certificate must vanish on: edges and within-block
    off-diagonal entries."""
    n = graph.n
    mask = graph.adjacency(dtype=bool)
    ind = part.indicator()
    within = (ind @ ind.T) > 0.5
    np.fill_diagonal(within, False)
    return mask | within


@dataclass(frozen=True)
class ProjectionResult:
    matrix: np.ndarray
    iterations: int
    residual: float
    converged: bool
    distance: float  # Frobenius distance to the block dual matrix


def project_certificate(
    graph: Graph,
    part: CliquePartition,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> ProjectionResult:
    """Project the block dual matrix onto the certificate constraint set.

    Alternates the two closed-form projections (two-sided projection onto
    matrices with rows in the balanced subspace; entry masking onto matrices
    vanishing on edges and within-block off-diagonals) starting from the
    block dual matrix.  For two subspaces this converges to the Frobenius
    projection of the starting point onto the intersection.  Stops when
    successive iterates differ by at most `tol` in Frobenius norm; hitting
    `max_iter` is reported via `converged`, not raised.
    """
    canon = build_canonical(part)
    basis = balanced_basis(part)
    proj = basis @ basis.T
    mask = _forbidden_mask(graph, part)

    x = canon.dual_block.copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        prev = x
        x = symmetrize(proj @ x @ proj)
        x[mask] = 0.0
        residual = frob_norm(x - prev)
        if residual <= tol:
            break
    converged = residual <= tol
    distance = frob_norm(x - canon.dual_block)
    return ProjectionResult(x, iterations, residual, converged, distance)


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of the certificate checks plus named residuals."""

    psd_ok: bool
    support_ok: bool
    complementarity_ok: bool
    rank_ok: bool
    extreme_point_ok: bool
    residuals: dict
    reason: Optional[str] = None

    def __post_init__(self):
        if self.certified and self.reason is not None:
            raise ValueError("certified report cannot carry a failure reason")
        if not self.certified and self.reason is None:
            raise ValueError("uncertified report needs a reason")

    @property
    def certified(self) -> bool:
        return (
            self.psd_ok
            and self.support_ok
            and self.complementarity_ok
            and self.rank_ok
            and self.extreme_point_ok
        )

    @property
    def verdict(self) -> str:
        return "certified" if self.certified else f"not certified ({self.reason})"

    def to_dict(self) -> dict:
        return {
            "psd_ok": self.psd_ok,
            "support_ok": self.support_ok,
            "complementarity_ok": self.complementarity_ok,
            "rank_ok": self.rank_ok,
            "extreme_point_ok": self.extreme_point_ok,
            "verdict": self.verdict,
            "reason": self.reason,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def _extremality_gram(z: np.ndarray, edges: np.ndarray, tol: float) -> bool:
    """Full-rank test of {E_ij Z} + {Z} via their Gram matrix.

    With S = Z @ Z, <E_ij Z, E_kl Z> expands into four S entries gated on
    shared endpoints, and <E_ij Z, Z> = S_ij, so the Gram matrix never
    needs the m x n^2 stack.
    """
    m = len(edges)
    s = z @ z
    i, j = edges[:, 0], edges[:, 1]
    gram = np.empty((m + 1, m + 1))
    gram[:m, :m] = 0.25 * (
        (i[:, None] == i[None, :]) * s[np.ix_(j, j)]
        + (i[:, None] == j[None, :]) * s[np.ix_(j, i)]
        + (j[:, None] == i[None, :]) * s[np.ix_(i, j)]
        + (j[:, None] == j[None, :]) * s[np.ix_(i, i)]
    )
    gram[m, :m] = gram[:m, m] = s[i, j]
    gram[m, m] = np.trace(s)
    lam = eigvals_sym(gram)
    sigma_max = float(np.sqrt(max(lam[-1], 0.0)))
    return bool(lam[0] > (tol * max(1.0, sigma_max)) ** 2)


def extremality_test(graph: Graph, part: CliquePartition, tol: float = CERT_TOL) -> bool:
    """True iff the |E|+1 stacked products {E_ij Z} + {Z} have full rank.

    Full rank certifies that the planted point is an extreme point of the
    theta feasible region.  Small problems use the direct stacked rank; large
    ones the (identical-rank) Gram form.
    """
    z = build_canonical(part).dual_block
    n = graph.n
    edges = np.asarray(graph.sorted_edges(), dtype=int).reshape(-1, 2)
    m = len(edges)
    if (m + 1) * n * n <= 2_000_000:
        vectors = []
        for i, j in edges:
            prod = np.zeros((n, n))
            prod[i] += 0.5 * z[j]
            prod[j] += 0.5 * z[i]
            vectors.append(prod)
        vectors.append(z)
        return stack_rank(vectors, tol) == m + 1
    return _extremality_gram(z, edges, tol)


def verify_certificate(
    graph: Graph,
    part: CliquePartition,
    z: np.ndarray,
    tol: float = CERT_TOL,
    extreme_point_ok: Optional[bool] = None,
) -> CertificateReport:
    """Check a candidate dual certificate against all uniqueness conditions.

    Conditions: PSD; zero at every edge; annihilates the vectors
    k*1_C - e (equivalently all rows lie in the balanced subspace); numeric
    rank equal to n - (k-1) with an unambiguous eigenvalue gap.  Failures are
    report entries, never exceptions.  `extreme_point_ok` may be passed in
    when the extremality test was already run.
    """
    n, k = part.n, part.k
    z = symmetrize(np.asarray(z, dtype=float))

    lam = eigvals_sym(z)
    anchor = max(1.0, float(lam[-1]))
    psd_ok = bool(lam[0] >= -tol * anchor)

    if graph.edges:
        eidx = np.asarray(graph.sorted_edges())
        edge_violation = float(np.abs(z[eidx[:, 0], eidx[:, 1]]).max())
    else:
        edge_violation = 0.0
    support_ok = bool(edge_violation <= tol)

    ind = part.indicator()
    directions = k * ind - 1.0  # columns k*1_C - e
    row_violation = float(np.abs(z @ directions).max())
    complementarity_ok = bool(row_violation <= tol)

    zero_mask = np.abs(lam) <= tol * anchor
    rank = int((~zero_mask).sum())
    expected_rank = n - (k - 1)
    if rank == n or rank == 0:
        gap = np.inf
    else:
        gap = float(np.abs(lam[~zero_mask]).min() - np.abs(lam[zero_mask]).max())
    rank_ok = rank == expected_rank
    rank_ambiguous = rank_ok and gap < 10.0 * tol * anchor
    if rank_ambiguous:
        rank_ok = False

    if extreme_point_ok is None:
        extreme_point_ok = extremality_test(graph, part, tol)

    reason = None
    if not extreme_point_ok:
        reason = "extremality"
    elif not psd_ok:
        reason = "psd"
    elif not support_ok:
        reason = "support"
    elif not complementarity_ok:
        reason = "complementarity"
    elif rank_ambiguous:
        reason = "rank ambiguous"
    elif not rank_ok:
        reason = "rank"

    residuals = {
        "lambda_min": float(lam[0]),
        "edge_violation": edge_violation,
        "row_space_violation": row_violation,
        "rank": float(rank),
        "expected_rank": float(expected_rank),
        "eig_gap": float(gap),
        "trace": float(np.trace(z)),
    }
    return CertificateReport(
        psd_ok=psd_ok,
        support_ok=support_ok,
        complementarity_ok=complementarity_ok,
        rank_ok=rank_ok,
        extreme_point_ok=bool(extreme_point_ok),
        residuals=residuals,
        reason=reason,
    )


@dataclass(frozen=True)
class IncoherenceSample:
    max_ratio: float
    pairs: int
    applicable: bool  # False when the graph has no cross-block edges


def incoherence_sample(
    graph: Graph, part: CliquePartition, trials: int, seed: int
) -> IncoherenceSample:
    """Monte-Carlo estimate of the angle between the two constraint factors.

    Draws random pairs (K supported on cross-block edges; L in the orthogonal
    complement, within the ambient space of matrices with diagonal
    within-block blocks, of the matrices whose rows lie in the balanced
    subspace) and returns the largest observed |<K, L>| / (|K|_F |L|_F).
    Zero-norm draws are rejected and redrawn.
    """
    n = graph.n
    block_of = part.block_of()
    cross = [(i, j) for (i, j) in graph.sorted_edges() if block_of[i] != block_of[j]]
    if not cross:
        return IncoherenceSample(0.0, 0, False)
    ci = np.array([e[0] for e in cross])
    cj = np.array([e[1] for e in cross])

    basis = balanced_basis(part)
    proj = basis @ basis.T
    ind = part.indicator()
    within_off = (ind @ ind.T) > 0.5
    np.fill_diagonal(within_off, False)

    rng = np.random.default_rng(seed)
    max_ratio = 0.0
    for _ in range(trials):
        for _attempt in range(100):
            vals = rng.standard_normal(len(cross))
            k_mat = np.zeros((n, n))
            k_mat[ci, cj] = vals
            k_mat[cj, ci] = vals

            y = symmetrize(rng.standard_normal((n, n)))
            l_mat = y - symmetrize(proj @ y @ proj)
            l_mat[within_off] = 0.0

            nk = frob_norm(k_mat)
            nl = frob_norm(l_mat)
            if nk > 1e-12 and nl > 1e-12:
                break
        else:  # pragma: no cover - would need a degenerate geometry
            raise RuntimeError("could not draw a non-degenerate sample pair")
        ratio = abs(float(np.sum(k_mat * l_mat))) / (nk * nl)
        max_ratio = max(max_ratio, ratio)
    return IncoherenceSample(max_ratio, trials, True)


def deterministic_recovery(
    graph: Graph,
    part: CliquePartition,
    tol: float = CERT_TOL,
    projection_tol: float = 1e-10,
    projection_max_iter: int = 10_000,
) -> CertificateReport:
    """Full pipeline: sparsity, threshold, extremality, projection, checks.

    A certified verdict witnesses that the planted pair is the unique optimum
    of the theta program.  Verification is attempted even when the sparsity
    parameter exceeds the threshold (the threshold is sufficient, not
    necessary).  Raises ValueError when the partition is not a clique
    partition of the graph.
    """
    c_min = scc_parameter(graph, part)  # validates the partition
    threshold = recovery_threshold_fraction(part)
    extremal = extremality_test(graph, part, tol)
    projection = project_certificate(graph, part, projection_tol, projection_max_iter)
    report = verify_certificate(graph, part, projection.matrix, tol, extreme_point_ok=extremal)

    residuals = dict(report.residuals)
    residuals.update(
        {
            "c_min": float(c_min),
            "threshold": float(threshold),
            "below_threshold": 1.0 if c_min <= threshold else 0.0,
            "projection_iterations": float(projection.iterations),
            "projection_residual": float(projection.residual),
            "projection_distance": float(projection.distance),
        }
    )
    return CertificateReport(
        psd_ok=report.psd_ok,
        support_ok=report.support_ok,
        complementarity_ok=report.complementarity_ok,
        rank_ok=report.rank_ok,
        extreme_point_ok=report.extreme_point_ok,
        residuals=residuals,
        reason=report.reason,
    )


def dump_matrix_csv(path, m: np.ndarray) -> None:
    """Debug helper: write a matrix as dense CSV."""
    np.savetxt(path, np.asarray(m, dtype=float), delimiter=",")
