"""Dense symmetric-matrix helpers shared by the solver and certificate code.

Thin, contract-carrying wrappers around LAPACK (numpy.linalg): spectra, PSD
tests with explicit tolerance semantics, numeric rank, norms, the nearest-PSD
projection, and rank tests on stacked flattened matrices.  All rank / PSD
decisions use relative tolerances anchored at max(1, lambda_max).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Spectrum",
    "symmetrize",
    "eig_sym",
    "eigvals_sym",
    "psd_check",
    "numeric_rank",
    "frob_norm",
    "spectral_norm",
    "proj_psd",
    "stack_rank",
]

#: decision tolerance for certificate checks
CERT_TOL = 1e-8
#: tolerance for linear-algebra self checks
LA_TOL = 1e-10


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy ((m + m.T) / 2; addition commutes bitwise)."""
    return (m + m.T) / 2.0


def _check_finite_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition with ascending eigenvalues and orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q, lam = self.eigenvectors, self.eigenvalues
        return symmetrize(q @ (lam[:, None] * q.T))


def eig_sym(m: np.ndarray) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix."""
    m = _check_finite_square(m)
    lam, q = np.linalg.eigh(symmetrize(m))
    return Spectrum(lam, q)


def eigvals_sym(m: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues only (cheaper than eig_sym)."""
    m = _check_finite_square(m)
    return np.linalg.eigvalsh(symmetrize(m))


def _anchor(eigenvalues: np.ndarray) -> float:
    return max(1.0, float(eigenvalues[-1]))


def psd_check(m: np.ndarray, tol: float = CERT_TOL) -> bool:
    """True iff lambda_min >= -tol * max(1, lambda_max)."""
    lam = eigvals_sym(m)
    return float(lam[0]) >= -tol * _anchor(lam)


def numeric_rank(m: np.ndarray, tol: float = CERT_TOL) -> int:
    """Number of eigenvalues with |lambda| > tol * max(1, lambda_max)."""
    lam = eigvals_sym(m)
    return int((np.abs(lam) > tol * _anchor(lam)).sum())


def frob_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, "fro"))


def spectral_norm(m: np.ndarray) -> float:
    lam = eigvals_sym(m)
    return float(np.abs(lam).max())


def proj_psd(m: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (eigenvalue clipping).

    Returns the input unchanged when it is already PSD, so the projection is
    exactly idempotent.
    """
    m = _check_finite_square(m)
    lam, q = np.linalg.eigh(symmetrize(m))
    if lam[0] >= 0.0:
        return m
    lam = np.maximum(lam, 0.0)
    return symmetrize(q @ (lam[:, None] * q.T))


def stack_rank(vectors: Sequence[np.ndarray], tol: float = LA_TOL) -> int:
    """Numeric rank of the matrix whose rows are the flattened inputs.

    Rank counts singular values above tol * max(1, sigma_max).
    """
    if len(vectors) == 0:
        raise ValueError("stack_rank needs at least one vector")
    stacked = np.stack([np.asarray(v, dtype=float).ravel() for v in vectors])
    sigma = np.linalg.svd(stacked, compute_uv=False)
    return int((sigma > tol * max(1.0, float(sigma[0]))).sum())
