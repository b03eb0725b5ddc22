import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from smectic.sparse import (CooBuilder, CsrMatrix, LaggedLU, SingularMatrixError,
                            SparsityPattern, relative_residual, solve_direct, spmv)


def _csr(dense):
    return CsrMatrix.from_scipy(sp.csr_matrix(np.asarray(dense, dtype=float)))


def test_spmv_identity():
    x = np.arange(5.0)
    np.testing.assert_array_equal(spmv(CsrMatrix.identity(5), x), x)


def test_spmv_hand():
    assert spmv(_csr([[1, 2], [3, 4]]), np.ones(2)).tolist() == [3.0, 7.0]


def test_spmv_zero_vector():
    A = _csr(np.arange(12.0).reshape(3, 4))
    assert spmv(A, np.zeros(4)).tolist() == [0.0, 0.0, 0.0]


def test_spmv_empty_rows():
    A = _csr([[0, 0], [1, 0], [0, 0]])
    assert spmv(A, np.array([2.0, 5.0])).tolist() == [0.0, 2.0, 0.0]


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        spmv(CsrMatrix.identity(3), np.ones(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_spmv_matches_scipy(m, n, density, seed):
    rng = np.random.default_rng(seed)
    S = sp.random(m, n, density=density, random_state=seed, format="csr")
    x = rng.standard_normal(n)
    np.testing.assert_allclose(spmv(CsrMatrix.from_scipy(S), x), S @ x, rtol=1e-13, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 60), st.integers(0, 2**31))
def test_builder_sums_duplicates(n, k, seed):
    rng = np.random.default_rng(seed)
    r, c = rng.integers(0, n, k), rng.integers(0, n, k)
    v = rng.standard_normal(k)
    b = CooBuilder(n)
    b.add(r, c, v)
    A = b.finalize()
    dense = np.zeros((n, n))
    np.add.at(dense, (r, c), v)
    np.testing.assert_allclose(A.toarray(), dense, atol=1e-14)
    assert A.check() == []


def test_builder_scalar_broadcast_and_block():
    b = CooBuilder(3)
    b.add([0, 1], [0, 1], 2.0)
    b.add_block(np.array([[1, 2]]), np.array([[1, 2]]), np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    np.testing.assert_array_equal(b.finalize().toarray(),
                                  [[2, 0, 0], [0, 3, 2], [0, 3, 4]])


def test_builder_length_mismatch():
    with pytest.raises(ValueError):
        CooBuilder(2).add([0, 1], [0], [1.0, 2.0])


def test_pattern_out_of_range():
    with pytest.raises(IndexError):
        SparsityPattern([0, 3], [0, 0], (3, 3))


def test_pattern_assembly_bit_reproducible(rng):
    r, c = rng.integers(0, 50, 5000), rng.integers(0, 50, 5000)
    v = rng.standard_normal(5000) * 10.0 ** rng.integers(-8, 8, 5000)
    pat = SparsityPattern(r, c, (50, 50))
    a1, a2 = pat.assemble(v), SparsityPattern(r, c, (50, 50)).assemble(v)
    assert a1.values.tobytes() == a2.values.tobytes()


def test_solve_identity():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(solve_direct(CsrMatrix.identity(3), b), b)


def test_solve_spd_2x2():
    np.testing.assert_allclose(solve_direct(_csr([[2, 1], [1, 2]]), np.array([3.0, 3.0])),
                               [1.0, 1.0], rtol=1e-15)


def test_solve_random_sparse(rng):
    n = 200
    S = sp.random(n, n, density=0.02, random_state=7, format="csr") + sp.eye(n) * 5.0
    A = CsrMatrix.from_scipy(S)
    b = rng.standard_normal(n)
    assert relative_residual(A, solve_direct(A, b), b) <= 1e-10


def test_singular_names_row():
    A = _csr([[1, 0, 0], [0, 0, 0], [0, 0, 1]])
    with pytest.raises(SingularMatrixError) as exc:
        solve_direct(A, np.ones(3))
    assert exc.value.row == 1
    assert "1" in str(exc.value)


def test_singular_dependent_rows():
    A = _csr([[1, 2, 0], [2, 4, 0], [0, 0, 1]])
    with pytest.raises(SingularMatrixError) as exc:
        solve_direct(A, np.ones(3))
    assert exc.value.row in (0, 1)


def test_solve_rejects_nonsquare():
    with pytest.raises(ValueError):
        solve_direct(_csr(np.ones((2, 3))), np.ones(2))


def test_lagged_lu_reuses_factorization(rng):
    n = 300
    base = sp.random(n, n, density=0.02, random_state=3, format="csr") + sp.eye(n) * 4.0
    solver = LaggedLU(rtol=1e-10)
    for k in range(5):
        S = base + sp.eye(n) * (1e-4 * k)
        A = CsrMatrix.from_scipy(S)
        b = rng.standard_normal(n)
        x = solver.solve(A, b)
        assert relative_residual(A, x, b) <= 1e-12
    assert solver.n_factorizations == 1
    assert solver.n_solves == 5


def test_lagged_lu_refactorizes_on_large_change(rng):
    n = 100
    A1 = CsrMatrix.from_scipy(sp.eye(n) * 2.0 + sp.random(n, n, density=0.05, random_state=1))
    A2 = CsrMatrix.from_scipy(sp.eye(n) * -3.0 + sp.random(n, n, density=0.05, random_state=2))
    solver = LaggedLU()
    b = rng.standard_normal(n)
    solver.solve(A1, b)
    x = solver.solve(A2, b)
    assert relative_residual(A2, x, b) <= 1e-12
    assert solver.n_factorizations == 2
