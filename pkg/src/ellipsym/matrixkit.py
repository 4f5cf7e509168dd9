"""Structured linear-algebra primitives: vec/vecs, commutation and duplication
matrices, PSD square roots, Mahalanobis forms and Schur complements.

All functions are pure; matrices are plain ``numpy`` arrays.  Commutation and
duplication matrices are assembled from explicit index maps and realized
densely on demand, with a size guard so that Fisher-information assembly for
moderate dimensions stays cheap.
"""

import numpy as np
from scipy import linalg

__all__ = [
    "NotPositiveDefinite",
    "vec",
    "unvec",
    "vecs",
    "unvecs",
    "commutation",
    "commutation_apply",
    "duplication",
    "psd_sqrt",
    "chol_sqrt",
    "check_symmetric",
    "validate_scatter",
    "mahalanobis",
    "quad_forms",
    "schur_conditional",
    "StructuredCov",
]

# Largest dimension m for which m^2 x m^2 commutation/duplication matrices are
# realized densely.
DENSE_DIM_GUARD = 32

SYMMETRY_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    """Raised when a matrix required to be positive definite is not."""


def vec(mat):
    """Stack the columns of ``mat`` into a single vector."""
    mat = np.asarray(mat)
    return mat.reshape(-1, order="F")


def unvec(v, rows, cols=None):
    """Inverse of :func:`vec` for a ``rows x cols`` matrix."""
    v = np.asarray(v)
    if cols is None:
        cols = v.size // rows
    return v.reshape(rows, cols, order="F")


def check_symmetric(mat, rtol=SYMMETRY_RTOL):
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = max(np.abs(mat).max(), 1.0)
    if np.abs(mat - mat.T).max() > rtol * scale:
        raise ValueError("matrix is not symmetric to tolerance")
    return mat


def vecs(mat, rtol=SYMMETRY_RTOL):
    """Half-vectorization: column stacking with supradiagonal entries removed.

    Requires a symmetric input; the result has length m(m+1)/2 and satisfies
    ``duplication(m) @ vecs(S) == vec(S)``.
    """
    mat = check_symmetric(mat, rtol=rtol)
    m = mat.shape[0]
    rows, cols = np.tril_indices(m)
    # tril_indices runs row-major over the lower triangle; reorder to
    # column-major (per-column blocks) to match the vec convention.
    order = np.lexsort((rows, cols))
    return mat[rows[order], cols[order]]


def unvecs(v, m):
    """Inverse of :func:`vecs`: rebuild the symmetric m x m matrix."""
    v = np.asarray(v)
    if v.size != m * (m + 1) // 2:
        raise ValueError("vecs vector has wrong length for dimension m")
    out = np.zeros((m, m), dtype=v.dtype)
    pos = 0
    for j in range(m):
        block = v[pos : pos + m - j]
        out[j:, j] = block
        out[j, j:] = block
        pos += m - j
    return out


def commutation_perm(r, c):
    """Index map ``p`` with ``vec(M.T) == vec(M)[p]`` for any r x c matrix M."""
    idx = np.arange(r * c).reshape(r, c, order="F")
    return idx.T.reshape(-1, order="F")


def commutation_apply(r, c, v):
    """Apply the (rc x rc) commutation matrix to a stacked vector."""
    return np.asarray(v)[commutation_perm(r, c)]


def _guard_dense(r, c):
    if r * c > DENSE_DIM_GUARD**2:
        raise ValueError(
            f"dense realization of a {r * c} x {r * c} matrix exceeds the "
            f"size guard (dimension product {r * c} > {DENSE_DIM_GUARD**2})"
        )


def commutation(r, c):
    """Dense commutation matrix K with K @ vec(M) = vec(M.T), M of shape r x c."""
    _guard_dense(r, c)
    n = r * c
    K = np.zeros((n, n))
    K[np.arange(n), commutation_perm(r, c)] = 1.0
    return K


def duplication(m):
    """Dense duplication matrix D with D @ vecs(S) = vec(S) for symmetric S.

    Shape m^2 x m(m+1)/2, full column rank, exactly m^2 unit entries.
    """
    _guard_dense(m, m)
    D = np.zeros((m * m, m * (m + 1) // 2))
    col = 0
    for j in range(m):
        for i in range(j, m):
            D[j * m + i, col] = 1.0
            D[i * m + j, col] = 1.0
            col += 1
    return D


def _eigh_pd(mat, label="matrix"):
    """Eigendecompose a symmetric matrix, raising unless it is numerically PD.

    The PD cutoff is m * eps * max eigenvalue; below that the input is
    rejected rather than silently regularized.
    """
    mat = check_symmetric(mat)
    w, v = np.linalg.eigh(mat)
    m = mat.shape[0]
    tol = m * np.finfo(float).eps * max(w[-1], 0.0)
    if w[0] <= tol:
        raise NotPositiveDefinite(
            f"{label} is not positive definite: min eigenvalue {w[0]:.3e} "
            f"<= tolerance {tol:.3e}"
        )
    return w, v


def psd_sqrt(mat):
    """Symmetric positive-definite square root A with A @ A.T == mat.

    The eigendecomposition root is used so that A is unique and symmetric,
    which keeps seeded sampling deterministic across square-root choices.
    """
    w, v = _eigh_pd(mat, label="psd_sqrt input")
    return (v * np.sqrt(w)) @ v.T


def chol_sqrt(mat):
    """Lower-triangular Cholesky square root (alternative to :func:`psd_sqrt`)."""
    mat = check_symmetric(mat)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from exc


def validate_scatter(mat):
    """Check that ``mat`` is a symmetric positive definite scatter matrix."""
    _eigh_pd(mat, label="scatter matrix")
    return np.asarray(mat, dtype=float)


def mahalanobis(x, mu, sigma):
    """Quadratic form (x - mu)^T sigma^-1 (x - mu), solved via Cholesky."""
    d = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    try:
        cho = linalg.cho_factor(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"mahalanobis scatter not PD: {exc}") from exc
    y = linalg.cho_solve(cho, d)
    return float(d @ y)


def quad_forms(data, mu, sigma):
    """Row-wise Mahalanobis quadratic forms for an n x m data matrix."""
    d = np.asarray(data, dtype=float) - np.asarray(mu, dtype=float)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"quad_forms scatter not PD: {exc}") from exc
    z = linalg.solve_triangular(chol, d.T, lower=True)
    return np.einsum("ij,ij->j", z, z)


def schur_conditional(sigma, split):
    """Partition ``sigma`` at ``split`` and return (S11, S12, S21, S22, S22|1).

    S22|1 = S22 - S21 S11^-1 S12 is the Schur complement of the leading
    block; S11 must be positive definite.
    """
    sigma = check_symmetric(sigma)
    m = sigma.shape[0]
    if not 1 <= split < m:
        raise ValueError(f"split must be in [1, {m - 1}], got {split}")
    s11 = sigma[:split, :split]
    s12 = sigma[:split, split:]
    s21 = sigma[split:, :split]
    s22 = sigma[split:, split:]
    try:
        cho = linalg.cho_factor(s11, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"leading block not PD: {exc}") from exc
    s2g1 = s22 - s21 @ linalg.cho_solve(cho, s12)
    s2g1 = 0.5 * (s2g1 + s2g1.T)
    return s11, s12, s21, s22, s2g1


class StructuredCov:
    """Covariance of the form sigma1 (I+K)(S x S) + sigma2 vec(S) vec(S)^T.

    The factored form (sigma1, sigma2, S) is kept; the dense m^2 x m^2
    realization is built on demand.  Validity requires sigma1 > 0 and
    sigma2 >= -2 sigma1 / m, which makes the dense matrix PSD on the
    symmetric subspace.
    """

    def __init__(self, sigma1, sigma2, base):
        base = check_symmetric(np.asarray(base, dtype=float))
        if sigma1 <= 0:
            raise ValueError(f"sigma1 must be positive, got {sigma1}")
        m = base.shape[0]
        bound = -2.0 * sigma1 / m
        if sigma2 < bound - 1e-12 * abs(bound):
            raise ValueError(
                f"sigma2 = {sigma2} violates the bound sigma2 >= -2 sigma1/m = {bound}"
            )
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)
        self.base = base

    @property
    def dim(self):
        return self.base.shape[0]

    def dense(self):
        m = self.dim
        K = commutation(m, m)
        v = vec(self.base)
        return (
            self.sigma1 * (np.eye(m * m) + K) @ np.kron(self.base, self.base)
            + self.sigma2 * np.outer(v, v)
        )

    def __repr__(self):
        return (
            f"StructuredCov(sigma1={self.sigma1:.6g}, sigma2={self.sigma2:.6g}, "
            f"dim={self.dim})"
        )
