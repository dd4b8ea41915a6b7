import io

import numpy as np
import pytest

from ocs import (
    DenseLimitError,
    GeneratorConfig,
    generate_pedigree,
    group_coancestry,
    henderson_weights,
    inbreeding,
    inverse_relationship,
    inverse_root,
    parse_pedigree,
    relationship_matrix,
)
from ocs.kinship import write_coordinate

from conftest import INBREEDING_9, INVERSE_9, RELATIONSHIP_9


def test_relationship_matches_published(fig1):
    A = relationship_matrix(fig1)
    assert np.abs(A - RELATIONSHIP_9).max() <= 1e-12
    assert A[2, 5] == 24 / 32
    assert A[5, 5] == 40 / 32
    assert A[7, 8] == 17 / 32


def test_relationship_founders_identity():
    ped = parse_pedigree("id,sire,dam,ebv\n" + "\n".join(f"{i},0,0,1" for i in range(1, 6)))
    assert np.array_equal(relationship_matrix(ped), np.eye(5))


def test_dense_limit_guard(fig1):
    with pytest.raises(DenseLimitError):
        relationship_matrix(fig1, dense_limit=5)


def test_inbreeding_matches_published(fig1):
    h = inbreeding(fig1)
    assert np.abs(h - INBREEDING_9).max() <= 1e-15
    assert h[5] == 0.25 and h[7] == 38 / 32 - 1


def test_inbreeding_founders_zero():
    ped = parse_pedigree("id,sire,dam,ebv\n1,0,0,1\n2,0,0,1\n3,0,0,1\n")
    assert np.all(inbreeding(ped) == 0)


def test_weights_published_values(fig1):
    b = henderson_weights(fig1)
    assert b[0] == 1.0
    assert b[2] == 2.0
    assert b[4] == pytest.approx(4 / 3, abs=1e-15)
    # member 8 has no offspring, so its weight is the printed diagonal
    assert b[7] == pytest.approx(16 / 7, abs=1e-15)
    assert b[7] == pytest.approx(96 / 42, abs=1e-15)


def test_weights_all_founders():
    ped = parse_pedigree("id,sire,dam,ebv\n1,0,0,1\n2,0,0,1\n")
    assert np.array_equal(henderson_weights(ped), np.ones(2))


def test_weights_reject_corrupt_inbreeding(fig1):
    bad = np.ones(9) * 2.0  # h must stay below 1
    with pytest.raises(ValueError, match="nonpositive"):
        henderson_weights(fig1, bad)


def test_inverse_matches_published(fig1):
    ainv = inverse_relationship(fig1)
    assert np.abs(ainv.toarray() - INVERSE_9).max() <= 1e-12
    assert ainv[0, 0] == pytest.approx(105 / 42, abs=1e-15)
    assert ainv[5, 7] == pytest.approx(-48 / 42, abs=1e-15)
    assert ainv.nnz <= 9 * 9


def test_inverse_founders_identity():
    ped = parse_pedigree("id,sire,dam,ebv\n1,0,0,1\n2,0,0,1\n")
    assert np.array_equal(inverse_relationship(ped).toarray(), np.eye(2))


def test_root_rows(fig1):
    b = henderson_weights(fig1)
    root = inverse_root(fig1, b)
    row8 = root.getrow(7).toarray().ravel()
    scale = np.sqrt(16 / 7)
    assert row8[7] == pytest.approx(scale, abs=1e-15)
    assert row8[6] == pytest.approx(-scale / 2, abs=1e-15)
    assert row8[5] == pytest.approx(-scale / 2, abs=1e-15)
    assert np.count_nonzero(row8) == 3
    # founder rows carry a single unit entry
    assert root.getrow(0).toarray().ravel().tolist() == [1.0] + [0.0] * 8
    assert root.nnz <= 3 * 9


def test_root_factors_inverse(fig1):
    root = inverse_root(fig1)
    ainv = inverse_relationship(fig1)
    assert np.abs((root.T @ root).toarray() - ainv.toarray()).max() <= 1e-12


def test_group_coancestry_cases(fig1):
    m = 5
    assert group_coancestry(np.eye(m), np.full(m, 1 / m)) == pytest.approx(1 / (2 * m))
    A = relationship_matrix(fig1)
    e1 = np.zeros(9)
    e1[0] = 1.0
    assert group_coancestry(A, e1) == 0.5
    x = np.zeros(9)
    x[0] = x[1] = 0.5
    assert group_coancestry(A, x) == pytest.approx(0.25, abs=1e-15)


def test_group_coancestry_dim_mismatch():
    with pytest.raises(ValueError):
        group_coancestry(np.eye(3), np.ones(4))


def test_write_coordinate(fig1):
    buf = io.StringIO()
    write_coordinate(inverse_relationship(fig1), buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].split() == ["1", "1", repr(105 / 42)]
    assert len(lines) == inverse_relationship(fig1).nnz


@pytest.mark.parametrize("seed", [7, 21])
def test_generated_pedigree_identities(seed):
    cfg = GeneratorConfig(
        seed=seed, n_founders=12, n_cycles=3, offspring_per_cycle=16, selection_fraction=0.5
    )
    ped = generate_pedigree(cfg)
    A = relationship_matrix(ped)
    # positive definite: Cholesky succeeds
    np.linalg.cholesky(A)
    h = inbreeding(ped)
    assert np.abs(h - (np.diag(A) - 1)).max() <= 1e-12
    assert np.all(h >= 0) and np.all(h < 1)
    b = henderson_weights(ped, h)
    assert np.all(b > 0)
    ainv = inverse_relationship(ped, b)
    m = ped.size
    assert ainv.nnz <= 9 * m
    assert np.abs(ainv.toarray() @ A - np.eye(m)).max() <= 1e-10
    root = inverse_root(ped, b)
    assert root.nnz <= 3 * m
    assert np.abs((root.T @ root).toarray() - ainv.toarray()).max() <= 1e-12
    # quadratic-form equivalence through the transformed variable
    rng = np.random.default_rng(seed)
    x = rng.normal(size=m)
    y = A @ x
    lhs = x @ A @ x
    rhs = y @ (ainv @ y)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_inverse_seed7_m60_identity():
    cfg = GeneratorConfig(
        seed=7, n_founders=12, n_cycles=4, offspring_per_cycle=12, selection_fraction=0.6
    )
    ped = generate_pedigree(cfg)
    assert ped.size == 60
    A = relationship_matrix(ped)
    assert np.abs(inbreeding(ped) - (np.diag(A) - 1)).max() <= 1e-12
    ainv = inverse_relationship(ped)
    assert np.abs(ainv.toarray() @ A - np.eye(60)).max() <= 1e-10
