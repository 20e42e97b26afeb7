import numpy as np
import pytest

from thetacover.certificate import build_canonical
from thetacover.graphs import CliquePartition
from thetacover.symmat import (
    eig_sym,
    eigvals_sym,
    frob_norm,
    numeric_rank,
    proj_psd,
    psd_check,
    spectral_norm,
    stack_rank,
    symmetrize,
)


def test_eig_identity():
    spec = eig_sym(np.eye(4))
    assert np.allclose(spec.eigenvalues, np.ones(4))


def test_eig_all_ones():
    spec = eig_sym(np.ones((3, 3)))
    assert np.allclose(sorted(spec.eigenvalues), [0.0, 0.0, 3.0], atol=1e-12)


def test_eig_block_dual_two_blocks_of_two():
    z = build_canonical(CliquePartition.contiguous([2, 2])).dual_block
    lam = np.sort(eig_sym(z).eigenvalues)
    # spectrum formula: {0, 1/2 (x2), 1/1 = sum of inverse sizes}
    assert np.allclose(lam, [0.0, 0.5, 0.5, 1.0], atol=1e-12)


@pytest.mark.parametrize("order", [5, 40, 200])
def test_eig_reconstruction_and_orthonormality(order):
    rng = np.random.default_rng(order)
    m = symmetrize(rng.standard_normal((order, order)))
    spec = eig_sym(m)
    recon = spec.reconstruct()
    assert frob_norm(recon - m) <= 1e-10 * (1.0 + frob_norm(m))
    q = spec.eigenvectors
    assert np.abs(q.T @ q - np.eye(order)).max() <= 1e-10


def test_eig_rejects_non_finite():
    bad = np.array([[1.0, np.nan], [np.nan, 1.0]])
    with pytest.raises(ValueError):
        eig_sym(bad)
    with pytest.raises(ValueError):
        eigvals_sym(np.array([[np.inf]]))


def test_psd_rank_norms_on_all_ones():
    j3 = np.ones((3, 3))
    assert psd_check(j3)
    assert numeric_rank(j3) == 1
    assert frob_norm(j3) == pytest.approx(3.0)
    assert spectral_norm(j3) == pytest.approx(3.0)


def test_tolerance_semantics():
    m = np.diag([1.0, -1e-14])
    assert psd_check(m, 1e-10)
    assert numeric_rank(m, 1e-10) == 1


def test_slack_rank_three_blocks_of_two():
    x = build_canonical(CliquePartition.contiguous([2, 2, 2])).slack
    assert numeric_rank(x, 1e-8) == 2  # k - 1
    assert psd_check(x)


def test_rank_plus_kernel_dimension():
    rng = np.random.default_rng(3)
    for order, rank in [(6, 2), (10, 7), (12, 12)]:
        basis = rng.standard_normal((order, rank))
        m = symmetrize(basis @ basis.T)
        r = numeric_rank(m, 1e-10)
        assert r == rank
        lam = eigvals_sym(m)
        kernel = int((np.abs(lam) <= 1e-10 * max(1.0, lam[-1])).sum())
        assert r + kernel == order


def test_proj_psd_clips_negative_eigenvalues():
    out = proj_psd(np.diag([2.0, -3.0]))
    assert np.allclose(out, np.diag([2.0, 0.0]), atol=1e-14)


def test_proj_psd_keeps_psd_input_unchanged():
    m = np.diag([1.0, 2.0])
    assert proj_psd(m) is m


def test_proj_psd_distance_and_idempotence():
    m = np.diag([1.0, -1.0])
    out = proj_psd(m)
    assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-14)
    assert frob_norm(out - m) == pytest.approx(1.0)
    again = proj_psd(out)
    assert np.allclose(again, out, atol=1e-14)


def test_proj_psd_is_nearest_psd_point():
    rng = np.random.default_rng(11)
    m = symmetrize(rng.standard_normal((8, 8)))
    projected = proj_psd(m)
    assert psd_check(projected, 1e-10)
    base = frob_norm(projected - m)
    for _ in range(100):
        basis = rng.standard_normal((8, 8))
        candidate = symmetrize(basis @ basis.T)  # random PSD point
        assert base <= frob_norm(candidate - m) + 1e-12


def test_stack_rank_basics():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    assert stack_rank([e1, e2]) == 2
    v = np.array([1.0, 2.0, 3.0])
    assert stack_rank([v, 2 * v]) == 1
    with pytest.raises(ValueError):
        stack_rank([])


def test_stack_rank_on_disjoint_triangle_products():
    # the |E|+1 products {E_ij Z} + {Z} for two disjoint triangles have
    # full rank 7
    part = CliquePartition.contiguous([3, 3])
    z = build_canonical(part).dual_block
    edges = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
    vectors = []
    for i, j in edges:
        prod = np.zeros((6, 6))
        prod[i] += 0.5 * z[j]
        prod[j] += 0.5 * z[i]
        vectors.append(prod)
    vectors.append(z)
    assert stack_rank(vectors) == 7
