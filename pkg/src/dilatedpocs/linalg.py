"""Dense vector helpers and a CSR sparse matrix shared by all solvers.

Everything is 64-bit floating point. Matrices are immutable after
construction, so they can be shared freely between solver runs.
"""

import numpy as np
import scipy.sparse as sp


def as_vector(x, name="vector"):
    """Coerce ``x`` to a 1-D float64 array, rejecting empty or non-finite input."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return v


def dot(a, b):
    """Inner product of two equal-length vectors."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.dot(a, b))


def norm2(v):
    """Euclidean norm."""
    return float(np.linalg.norm(as_vector(v)))


def axpy(alpha, x, y):
    """Return ``alpha * x + y`` for equal-length vectors."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return float(alpha) * x + y


class SparseMatrix:
    """Compressed sparse row matrix of float64 entries.

    Duplicate triplets are summed on construction, explicitly stored zeros
    are dropped, and column indices are sorted within each row, so the CSR
    arrays exposed as ``row_ptr`` / ``col_idx`` / ``values`` are canonical.
    """

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if not np.all(np.isfinite(m.data)):
            raise ValueError("matrix entries must be finite")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError(f"matrix must be non-empty, got shape {m.shape}")
        for arr in (m.data, m.indices, m.indptr):
            arr.flags.writeable = False
        self._m = m
        self._row_norms_sq = None

    @classmethod
    def from_triplets(cls, rows, cols, i, j, v):
        """Build from (row, col, value) triplets; duplicate entries are summed."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        v = np.asarray(v, dtype=np.float64)
        if not (i.shape == j.shape == v.shape):
            raise ValueError("triplet arrays must have identical lengths")
        if i.size and (i.min() < 0 or i.max() >= rows or j.min() < 0 or j.max() >= cols):
            raise ValueError("triplet index out of range")
        return cls(sp.coo_matrix((v, (i, j)), shape=(rows, cols)))

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("dense input must be two-dimensional")
        return cls(sp.csr_matrix(a))

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(n, format="csr"))

    @property
    def rows(self):
        return self._m.shape[0]

    @property
    def cols(self):
        return self._m.shape[1]

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self):
        return self._m.nnz

    @property
    def row_ptr(self):
        return self._m.indptr

    @property
    def col_idx(self):
        return self._m.indices

    @property
    def values(self):
        return self._m.data

    @property
    def scipy(self):
        """The underlying ``scipy.sparse.csr_matrix`` (read-only buffers)."""
        return self._m

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.cols,):
            raise ValueError(f"dimension mismatch: matrix is {self.shape}, vector has length {x.size}")
        return self._m @ x

    def rmatvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.rows,):
            raise ValueError(f"dimension mismatch: matrix is {self.shape}, vector has length {v.size}")
        return self._m.T @ v

    def row(self, i):
        """CSR slices (column indices, values) of row ``i``; no copies."""
        lo, hi = self._m.indptr[i], self._m.indptr[i + 1]
        return self._m.indices[lo:hi], self._m.data[lo:hi]

    def row_dense(self, i):
        out = np.zeros(self.cols)
        idx, vals = self.row(i)
        out[idx] = vals
        return out

    def row_norms_sq(self):
        """Per-row sums of squared entries (cached)."""
        if self._row_norms_sq is None:
            sq = self._m.multiply(self._m)
            self._row_norms_sq = np.asarray(sq.sum(axis=1)).reshape(-1)
            self._row_norms_sq.flags.writeable = False
        return self._row_norms_sq

    def to_dense(self):
        return self._m.toarray()

    def triplets(self):
        """Return (i, j, v) arrays in row-major order."""
        coo = self._m.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def spmv(A, x):
    """Sparse matrix-vector product ``A x``."""
    return A.matvec(as_vector(x, "x"))


def spmv_transpose(A, v):
    """Transposed product ``A^T v``."""
    return A.rmatvec(as_vector(v, "v"))
