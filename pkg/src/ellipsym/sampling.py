"""Exact draws from elliptical laws via their stochastic representations.

Real draws are x = mu + sqrt(Q) A u with A the symmetric square root of the
scatter, u uniform on the unit sphere and Q from the kernel's modular law.
Compound-Gaussian kernels also sample through texture x speckle, which is
equal in law.  Complex noncircular draws use x = mu + sqrt(Q) A (D1 u + D2
conj(u)) with (A, D1, D2) built from a Takagi factorization of the
complementary scatter in the whitened coordinates.

Randomness comes from named Philox streams (see :mod:`ellipsym.rng`);
identical (seed, stream_id, spec) inputs reproduce batches bit for bit.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from . import families
from .families import FamilyKernel, q_law, texture_law
from .matrixkit import psd_sqrt, validate_scatter
from .rng import stream_rng

__all__ = [
    "DistributionSpec",
    "SampleBatch",
    "InfeasibleSpec",
    "sample_sphere",
    "sample_complex_sphere",
    "sample_res",
    "sample_cg",
    "sample_nc_ces",
    "sample_acg",
    "sample_spec",
    "affine_transform",
    "takagi",
    "nc_factors",
    "composite_real_spec",
    "export_csv",
]

KAPPA_FEASIBLE_TOL = 1e-10


class InfeasibleSpec(ValueError):
    """Raised for (Sigma, Omega) pairs with no valid stochastic representation."""


def _hermitian_sqrt(sigma):
    """Hermitian PSD square root of a Hermitian positive definite matrix."""
    sigma = np.asarray(sigma)
    if np.abs(sigma - sigma.conj().T).max() > 1e-12 * max(np.abs(sigma).max(), 1.0):
        raise ValueError("complex scatter must be Hermitian")
    w, v = np.linalg.eigh(sigma)
    m = sigma.shape[0]
    if w[0] <= m * np.finfo(float).eps * max(w[-1], 0.0):
        raise InfeasibleSpec(f"complex scatter not positive definite (min eig {w[0]:.3e})")
    return (v * np.sqrt(w)) @ v.conj().T


@dataclass(frozen=True)
class DistributionSpec:
    """A concrete elliptical law: kernel + symmetry center + scatter (+ Omega)."""

    kernel: FamilyKernel
    mu: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray = None

    def __post_init__(self):
        mu = np.asarray(self.mu)
        object.__setattr__(self, "mu", mu)
        m = self.kernel.dim
        if mu.shape != (m,):
            raise ValueError(f"mu must have shape ({m},)")
        sigma = np.asarray(self.sigma)
        if sigma.shape != (m, m):
            raise ValueError(f"sigma must have shape ({m},{m})")
        if self.kernel.is_complex:
            sigma = sigma.astype(complex)
            _hermitian_sqrt(sigma)  # raises unless Hermitian PD
        else:
            if np.iscomplexobj(sigma) or np.iscomplexobj(mu):
                raise ValueError("real kernels require real mu and sigma")
            sigma = validate_scatter(sigma)
        object.__setattr__(self, "sigma", sigma)
        if self.omega is not None:
            if self.kernel.realness != families.NONCIRCULAR:
                raise ValueError("omega requires a complex-noncircular kernel")
            om = np.asarray(self.omega, dtype=complex)
            if om.shape != (m, m):
                raise ValueError(f"omega must have shape ({m},{m})")
            if np.abs(om - om.T).max() > 1e-12 * max(np.abs(om).max(), 1.0):
                raise ValueError("omega must be complex symmetric")
            object.__setattr__(self, "omega", om)
            nc_factors(sigma, om)  # raises when infeasible

    @property
    def dim(self):
        return self.kernel.dim


@dataclass(frozen=True)
class SampleBatch:
    """n x m matrix of draws plus the provenance needed to reproduce them."""

    data: np.ndarray
    spec: DistributionSpec
    seed: int
    stream_id: int = 0

    @property
    def n(self):
        return self.data.shape[0]


def sample_sphere(m, count, rng):
    """Uniform draws on the unit real m-sphere (rows of unit norm)."""
    z = rng.standard_normal((count, m))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_complex_sphere(m, count, rng):
    """Uniform draws on the unit complex m-sphere."""
    z = rng.standard_normal((count, m)) + 1j * rng.standard_normal((count, m))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def takagi(b):
    """Takagi factorization b = U diag(s) U^T of a complex symmetric matrix.

    Built from the SVD b = W S V^H: Z = W^H conj(V) is unitary with
    S Z^T = Z S, so the principal square root of Z folds the phases into
    U = W Z^(1/2).  Returns (U, s) with U unitary and s >= 0 descending.
    """
    b = np.asarray(b, dtype=complex)
    if np.abs(b - b.T).max() > 1e-10 * max(np.abs(b).max(), 1.0):
        raise ValueError("takagi requires a complex symmetric matrix")
    w, s, vh = np.linalg.svd(b)
    z = w.conj().T @ vh.T
    u = w @ linalg.sqrtm(z)
    rec = (u * s) @ u.T
    if np.abs(rec - b).max() > 1e-8 * max(np.abs(b).max(), 1.0):
        raise RuntimeError("takagi factorization failed to reconstruct input")
    return u, s


def nc_factors(sigma, omega):
    """Factor (Sigma, Omega) into (A, kappa) with Sigma = A A^H, Omega = A diag(kappa) A^T.

    A is the Hermitian root of Sigma rotated by the Takagi basis of the
    whitened complementary scatter.  Feasibility requires 0 <= kappa_i <= 1;
    violations raise :class:`InfeasibleSpec` with the offending values.
    """
    a0 = _hermitian_sqrt(sigma)
    a0inv = np.linalg.inv(a0)
    b = a0inv @ omega @ a0inv.T
    u, kappa = takagi(b)
    if kappa.max() > 1.0 + KAPPA_FEASIBLE_TOL:
        raise InfeasibleSpec(
            f"(sigma, omega) infeasible: kappa values {np.sort(kappa)[::-1][:3]} exceed 1"
        )
    kappa = np.clip(kappa, 0.0, 1.0)
    return a0 @ u, kappa


def composite_real_spec(spec):
    """Real 2m-dimensional spec of the stacked vector (Re x, Im x).

    The complex law is defined by this mapping: the extended scatter
    [[Sigma, Omega], [Omega*, Sigma*]] corresponds to the real scatter
    (1/2) [[Re(Sigma+Omega), Im(Omega-Sigma)], [Im(Omega+Sigma), Re(Sigma-Omega)]].
    """
    if not spec.kernel.is_complex:
        raise ValueError("composite_real_spec expects a complex spec")
    m = spec.dim
    sig = spec.sigma
    om = spec.omega if spec.omega is not None else np.zeros((m, m), dtype=complex)
    top = np.hstack([np.real(sig + om), np.imag(om - sig)])
    bot = np.hstack([np.imag(om + sig), np.real(sig - om)])
    sigma_bar = 0.5 * np.vstack([top, bot])
    sigma_bar = 0.5 * (sigma_bar + sigma_bar.T)
    mu_bar = np.concatenate([np.real(spec.mu), np.imag(spec.mu)])
    kernel_bar = replace(spec.kernel, realness=families.REAL, dim=2 * m)
    return DistributionSpec(kernel_bar, mu_bar, sigma_bar)


def _draw_q(kernel, n, rng):
    return q_law(kernel).sample(rng, n)


def sample_res(spec, n, seed, stream_id=0):
    """Draws from a real elliptical law via x = mu + sqrt(Q) A u.

    The Gaussian kernel takes the direct speckle path mu + z A^T (equal in
    law, cheaper); every other kernel uses the generic modular route.
    """
    if spec.kernel.is_complex:
        raise ValueError("sample_res expects a real spec; use sample_nc_ces")
    rng = stream_rng(seed, stream_id)
    a = psd_sqrt(spec.sigma)
    if spec.kernel.family == "gaussian":
        scale = 1.0 / np.sqrt(spec.kernel.q_scale)
        data = spec.mu + scale * rng.standard_normal((n, spec.dim)) @ a.T
    else:
        q = _draw_q(spec.kernel, n, rng)
        u = sample_sphere(spec.dim, n, rng)
        data = spec.mu + np.sqrt(q)[:, None] * (u @ a.T)
    return SampleBatch(data, spec, int(seed), int(stream_id))


def sample_cg(spec, n, seed, stream_id=0):
    """Compound-Gaussian route: x = mu + sqrt(tau) * speckle.

    Equal in law to :func:`sample_res` for the same kernel.  Complex
    kernels use a circular complex speckle with E[n n^H] = Sigma and the
    kernel's texture unchanged.
    """
    tex = texture_law(spec.kernel)
    if tex is None:
        raise ValueError(f"kernel {spec.kernel.family!r} has no texture law")
    rng = stream_rng(seed, stream_id)
    tau = tex.sample(rng, n)
    m = spec.dim
    if spec.kernel.is_complex:
        if spec.omega is not None:
            raise ValueError("texture route supports circular complex specs only")
        a = _hermitian_sqrt(spec.sigma)
        z = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
        data = spec.mu + np.sqrt(tau)[:, None] * (z @ a.T)
    else:
        a = psd_sqrt(spec.sigma)
        z = rng.standard_normal((n, m))
        data = spec.mu + np.sqrt(tau)[:, None] * (z @ a.T)
    return SampleBatch(data, spec, int(seed), int(stream_id))


def sample_nc_ces(spec, n, seed, stream_id=0):
    """Draws from a complex (circular or noncircular) elliptical law.

    x = mu + sqrt(Q) A (D1 u + D2 conj(u)) with D1 = (D+ + D-)/2,
    D2 = (D+ - D-)/2, D+- = sqrt(I +- diag(kappa)); Omega = 0 collapses to
    the circular route x = mu + sqrt(Q) A u.
    """
    if not spec.kernel.is_complex:
        raise ValueError("sample_nc_ces expects a complex spec")
    rng = stream_rng(seed, stream_id)
    m = spec.dim
    q = _draw_q(spec.kernel, n, rng)
    u = sample_complex_sphere(m, n, rng)
    if spec.omega is None:
        a = _hermitian_sqrt(spec.sigma)
        mixed = u
    else:
        a, kappa = nc_factors(spec.sigma, spec.omega)
        d_plus = np.sqrt(1.0 + kappa)
        d_minus = np.sqrt(1.0 - kappa)
        d1 = (d_plus + d_minus) / 2
        d2 = (d_plus - d_minus) / 2
        mixed = u * d1 + np.conj(u) * d2
    data = spec.mu + np.sqrt(q)[:, None] * (mixed @ a.T)
    return SampleBatch(data, spec, int(seed), int(stream_id))


def sample_spec(spec, n, seed, stream_id=0):
    """Dispatch to the real or complex sampling route for the spec."""
    if spec.kernel.is_complex:
        return sample_nc_ces(spec, n, seed, stream_id)
    return sample_res(spec, n, seed, stream_id)


def sample_acg(sigma, n, seed, stream_id=0):
    """Angular draws x = z / ||z||, z Gaussian with covariance sigma.

    The law is invariant under sigma -> c^2 sigma.
    """
    sigma = validate_scatter(sigma)
    rng = stream_rng(seed, stream_id)
    a = psd_sqrt(sigma)
    z = rng.standard_normal((n, sigma.shape[0])) @ a.T
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def affine_transform(batch, b_mat, b_vec=None):
    """Apply y = B x + b rowwise; the law stays elliptical with the same
    characteristic generator and parameters (B mu + b, B Sigma B^T).

    When B changes the dimension, the transformed kernel is exact only for
    compound-Gaussian families (their generator does not depend on the
    dimension); other families raise, since their marginals leave the
    family.
    """
    b_mat = np.asarray(b_mat, dtype=float)
    spec = batch.spec
    m = spec.dim
    if b_mat.ndim != 2 or b_mat.shape[1] != m:
        raise ValueError(f"B must have {m} columns")
    rows = b_mat.shape[0]
    if np.linalg.matrix_rank(b_mat) < rows:
        raise ValueError("B must have full row rank")
    if rows != m and not spec.kernel.is_cg:
        raise ValueError(
            "dimension-changing transforms keep the kernel only for "
            "compound-Gaussian families; use the marginal generator instead"
        )
    if b_vec is None:
        b_vec = np.zeros(rows)
    b_vec = np.asarray(b_vec, dtype=float)
    new_kernel = replace(spec.kernel, dim=rows)
    new_spec = DistributionSpec(
        new_kernel, b_mat @ spec.mu + b_vec, b_mat @ spec.sigma @ b_mat.T
    )
    return SampleBatch(
        batch.data @ b_mat.T + b_vec, new_spec, batch.seed, batch.stream_id
    )


def export_csv(batch, path):
    """Write a batch to CSV: one row per draw, complex entries as re/im pairs.

    Metadata (spec, seed, stream) goes into '#'-prefixed header lines.
    """
    spec = batch.spec
    m = spec.dim
    complex_data = spec.kernel.is_complex
    if complex_data:
        cols = []
        for j in range(m):
            cols.extend([f"re_x{j}", f"im_x{j}"])
        flat = np.empty((batch.n, 2 * m))
        flat[:, 0::2] = batch.data.real
        flat[:, 1::2] = batch.data.imag
    else:
        cols = [f"x{j}" for j in range(m)]
        flat = batch.data
    with open(path, "w") as fh:
        fh.write(f"# kernel: {spec.kernel.describe()}\n")
        fh.write(f"# mu: {','.join(repr(v) for v in np.asarray(spec.mu).tolist())}\n")
        fh.write(f"# seed: {batch.seed} stream_id: {batch.stream_id}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, flat, delimiter=",", fmt="%.17g")
