"""CSR storage, deterministic triplet assembly and a direct sparse solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SingularMatrixError(RuntimeError):
    """Raised when the factorization meets a zero pivot."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"matrix is singular to working precision at pivot row {row}")


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    @classmethod
    def from_scipy(cls, A) -> "CsrMatrix":
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.shape[0], A.shape[1], A.indptr.astype(np.int64),
                   A.indices.astype(np.int64), A.data.astype(float))

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    def quadratic_form(self, v, w=None) -> float:
        """``w^T A v`` (``v^T A v`` when ``w`` is omitted)."""
        w = v if w is None else w
        return float(w @ spmv(self, v))

    def check(self) -> list[str]:
        problems = []
        if np.any(np.diff(self.row_offsets) < 0):
            problems.append("row offsets decrease")
        for r in range(self.n_rows):
            c = self.col_indices[self.row_offsets[r]:self.row_offsets[r + 1]]
            if np.any(np.diff(c) <= 0):
                problems.append(f"row {r}: column indices not strictly increasing")
        return problems


def spmv(A: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix has {A.n_cols} columns, vector {x.shape}")
    prod = A.values * x[A.col_indices]
    # reduceat misbehaves on empty rows; cumulative sums would lose accuracy.
    y = np.zeros(A.n_rows)
    nonempty = np.flatnonzero(np.diff(A.row_offsets) > 0)
    if len(nonempty):
        y[nonempty] = np.add.reduceat(prod, A.row_offsets[nonempty])
    return y


class SparsityPattern:
    """Fixed mapping from a triplet stream to CSR slots.

    Building the pattern sorts the (row, col) pairs once; ``assemble`` then
    sums values slot by slot in the original triplet order, so repeated
    assemblies with the same index stream are bit-reproducible.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        n_rows, n_cols = shape
        if len(rows) and (rows.min() < 0 or rows.max() >= n_rows
                          or cols.min() < 0 or cols.max() >= n_cols):
            raise IndexError("triplet index out of range")
        key = rows * n_cols + cols
        uniq, slot = np.unique(key, return_inverse=True)
        self.shape = (int(n_rows), int(n_cols))
        self.n_triplets = len(rows)
        self.slot = slot.ravel()
        self.col_indices = (uniq % n_cols).astype(np.int64)
        urow = uniq // n_cols
        self.row_offsets = np.searchsorted(urow, np.arange(n_rows + 1)).astype(np.int64)

    @property
    def nnz(self) -> int:
        return len(self.col_indices)

    def assemble(self, values) -> CsrMatrix:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_triplets,):
            raise ValueError(f"expected {self.n_triplets} values, got {values.shape}")
        data = np.bincount(self.slot, weights=values, minlength=self.nnz)
        return CsrMatrix(self.shape[0], self.shape[1], self.row_offsets, self.col_indices, data)


class CooBuilder:
    """Accumulates (row, col, value) triplets; duplicates sum on finalize."""

    def __init__(self, n_rows: int, n_cols: int | None = None):
        self.shape = (n_rows, n_rows if n_cols is None else n_cols)
        self._rows, self._cols, self._vals = [], [], []

    def add(self, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float)
        values = np.full(rows.shape, float(values)) if values.ndim == 0 else values.ravel()
        if not (len(rows) == len(cols) == len(values)):
            raise ValueError("rows, cols and values must have equal length")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)

    def add_block(self, row_dofs, col_dofs, local):
        """Scatter element matrices ``local[t, a, b]`` to (row_dofs[t, a], col_dofs[t, b])."""
        nt, na = row_dofs.shape
        nb = col_dofs.shape[1]
        r = np.broadcast_to(row_dofs[:, :, None], (nt, na, nb))
        c = np.broadcast_to(col_dofs[:, None, :], (nt, na, nb))
        self.add(r, c, local)

    def triplets(self):
        if not self._rows:
            e = np.empty(0, dtype=np.int64)
            return e, e, np.empty(0)
        return np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals)

    def pattern(self) -> SparsityPattern:
        r, c, _ = self.triplets()
        return SparsityPattern(r, c, self.shape)

    def finalize(self) -> CsrMatrix:
        r, c, v = self.triplets()
        return SparsityPattern(r, c, self.shape).assemble(v)


def _locate_zero_pivot(A: CsrMatrix) -> int:
    counts = np.diff(A.row_offsets)
    nz = np.zeros(A.n_rows, dtype=bool)
    nz[A.row_indices()[A.values != 0.0]] = True
    empty = np.flatnonzero(~nz | (counts == 0))
    if len(empty):
        return int(empty[0])
    if A.n_rows <= 4000:
        P, L, U = scipy.linalg.lu(A.toarray())
        d = np.abs(np.diag(U))
        k = int(np.argmin(d))
        return int(np.flatnonzero(P[:, k])[0])
    return -1


def _factorize(A: CsrMatrix):
    try:
        return spla.splu(A.to_scipy().tocsc())
    except RuntimeError as exc:
        row = _locate_zero_pivot(A)
        raise SingularMatrixError(row, f"{exc}; zero pivot at row {row}") from exc


def _diagnose(A: CsrMatrix, lu, rel: float, rtol: float):
    udiag = np.abs(lu.U.diagonal())
    tiny = np.finfo(float).eps * np.nanmax(udiag[np.isfinite(udiag)], initial=1.0)
    bad = ~np.isfinite(udiag) | (udiag <= tiny)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        row = int(np.flatnonzero(lu.perm_r == k)[0])
        raise SingularMatrixError(row)
    raise SolveError(f"relative residual {rel:.3e} exceeds {rtol:.1e}")


def solve_direct(A: CsrMatrix, b, rtol: float = 1e-10, refine: int = 1) -> np.ndarray:
    """Solve ``A x = b`` by sparse LU with partial pivoting (SuperLU).

    ``refine`` rounds of iterative refinement follow the triangular solves.
    Raises ``SingularMatrixError`` on a zero pivot and ``SolveError`` if the
    final relative residual exceeds ``rtol``.
    """
    b = _check_system(A, b)
    lu = _factorize(A)
    x = lu.solve(b)
    for _ in range(refine):
        x = x + lu.solve(b - spmv(A, x))
    rel = relative_residual(A, x, b)
    if not np.isfinite(rel) or rel > rtol:
        _diagnose(A, lu, rel, rtol)
    return x


def _check_system(A: CsrMatrix, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if A.n_rows != A.n_cols:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape != (A.n_rows,):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    return b


def relative_residual(A: CsrMatrix, x, b) -> float:
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(b - spmv(A, x)) / max(np.linalg.norm(b), np.finfo(float).tiny))


class LaggedLU:
    """Direct solver that reuses an earlier factorization while it still works.

    A stored LU factorization of a nearby matrix drives iterative refinement
    on the new matrix. When refinement stalls (residual reduction worse than
    ``max_ratio`` per sweep) or exceeds ``max_sweeps``, the current matrix is
    factorized afresh. Time-stepping matrices change by O(dt) per step, so a
    factorization typically survives many steps.

    Refinement stops at relative residual ``target``; anything above ``rtol``
    after a fresh factorization is an error.
    """

    def __init__(self, rtol: float = 1e-10, target: float = 1e-14, max_sweeps: int = 12,
                 max_ratio: float = 0.25, reuse: bool = True):
        self.rtol = rtol
        self.target = target
        self.max_sweeps = max_sweeps
        self.max_ratio = max_ratio
        self.reuse = reuse
        self._lu = None
        self._shape = None
        self._fresh_rel = 0.0
        self.n_factorizations = 0
        self.n_solves = 0
        self.last_residual = np.nan
        self.last_sweeps = 0

    def reset(self):
        self._lu = None

    def _refine(self, A, b, lu, x, bnorm):
        r = b - spmv(A, x)
        rn = np.linalg.norm(r)
        sweeps = 0
        while rn > self.target * bnorm and sweeps < self.max_sweeps:
            x_new = x + lu.solve(r)
            r_new = b - spmv(A, x_new)
            rn_new = np.linalg.norm(r_new)
            sweeps += 1
            if not rn_new < rn:
                break
            stalled = rn_new > self.max_ratio * rn
            x, r, rn = x_new, r_new, rn_new
            if stalled:
                break
        return x, rn, sweeps

    def solve(self, A: CsrMatrix, b) -> np.ndarray:
        b = _check_system(A, b)
        self.n_solves += 1
        bnorm = max(np.linalg.norm(b), np.finfo(float).tiny)
        if self.reuse and self._lu is not None and self._shape == A.shape:
            x, rn, sweeps = self._refine(A, b, self._lu, self._lu.solve(b), bnorm)
            accept = min(max(self.target, 10.0 * self._fresh_rel), self.rtol)
            if rn <= accept * bnorm:
                self.last_residual, self.last_sweeps = rn / bnorm, sweeps
                return x
        lu = _factorize(A)
        self.n_factorizations += 1
        x, rn, sweeps = self._refine(A, b, lu, lu.solve(b), bnorm)
        rel = rn / bnorm
        if not np.isfinite(rel) or rel > self.rtol:
            self._lu = None
            _diagnose(A, lu, rel, self.rtol)
        self._lu, self._shape, self._fresh_rel = lu, A.shape, rel
        self.last_residual, self.last_sweeps = rel, sweeps
        return x
