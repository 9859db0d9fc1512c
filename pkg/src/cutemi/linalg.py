"""Sparse storage, direct solves, and 2-norm condition numbers.

Thin layer over scipy: CSR storage, SuperLU factorization (partial
pivoting, fine for the indefinite saddle-point systems), and a dense-SVD
condition number. The study matrices are small (a few thousand DOFs), so
exact singular values beat iterative estimates where the sensitivity
sweeps need to resolve spikes.
"""

import re

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

# matrices above this size are refused by condition_number_2
DENSE_CAP = 20000

# sigma_min below this multiple of sigma_max counts as singular
SINGULAR_RTOL = 1e-14


class SingularMatrixError(Exception):
    """Factorization hit a zero pivot; pivot index when known, else -1."""

    def __init__(self, message, pivot=-1):
        super().__init__(message)
        self.pivot = pivot


class UnsupportedSizeError(Exception):
    pass


class SparseMatrix:
    """Compressed-row matrix; column indices sorted, duplicates summed."""

    def __init__(self, csr):
        csr = scipy.sparse.csr_matrix(csr)
        csr.sum_duplicates()
        csr.sort_indices()
        self.csr = csr

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals):
        coo = scipy.sparse.coo_matrix(
            (np.asarray(vals, dtype=float),
             (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(n_rows, n_cols))
        return cls(coo.tocsr())

    @property
    def shape(self):
        return self.csr.shape

    @property
    def n_rows(self):
        return self.csr.shape[0]

    @property
    def n_cols(self):
        return self.csr.shape[1]

    def matvec(self, x):
        return self.csr @ x

    def transpose(self):
        return SparseMatrix(self.csr.T.tocsr())

    def to_dense(self):
        return self.csr.toarray()

    def norm_fro(self):
        return scipy.sparse.linalg.norm(self.csr, "fro")

    def __matmul__(self, x):
        return self.csr @ x


def _as_csr(A):
    return A.csr if isinstance(A, SparseMatrix) else scipy.sparse.csr_matrix(A)


class LUFactorization:
    """Reusable sparse LU; one factorization, many right-hand sides."""

    def __init__(self, A):
        csr = _as_csr(A)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError("matrix must be square")
        try:
            self._lu = scipy.sparse.linalg.splu(csr.tocsc())
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc), pivot=_parse_pivot(str(exc))) from exc

    def solve(self, b):
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("factorization produced non-finite solution")
        return x


def _parse_pivot(message):
    hit = re.search(r"\d+", message)
    return int(hit.group()) if hit else -1


def factorize(A):
    return LUFactorization(A)


def solve_direct(A, b):
    """Solve Ax = b by sparse LU with partial pivoting."""
    b = np.asarray(b, dtype=float)
    csr = _as_csr(A)
    if csr.shape[0] != csr.shape[1]:
        raise ValueError("matrix must be square")
    if csr.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch: %s vs %s" % (csr.shape, b.shape))
    return LUFactorization(csr).solve(b)


def condition_number_2(A):
    """2-norm condition number sigma_max/sigma_min via dense SVD.

    Returns float('inf') when the matrix is numerically singular
    (sigma_min < 1e-14 * sigma_max); raises UnsupportedSizeError above
    the densify cap.
    """
    csr = _as_csr(A)
    n = csr.shape[0]
    if csr.shape[0] != csr.shape[1]:
        raise ValueError("matrix must be square")
    if n > DENSE_CAP:
        raise UnsupportedSizeError("dimension %d exceeds cap %d" % (n, DENSE_CAP))
    if n == 0:
        return 1.0
    sv = scipy.linalg.svdvals(csr.toarray())
    smax, smin = sv[0], sv[-1]
    if smax == 0.0 or smin < SINGULAR_RTOL * smax:
        return float("inf")
    return float(smax / smin)


def is_singular(kappa):
    """True for the +inf encoding produced by condition_number_2."""
    return np.isinf(kappa)
