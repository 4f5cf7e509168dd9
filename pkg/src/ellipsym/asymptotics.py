"""Asymptotic covariances of the scatter estimators and the structured
Fisher-information / Cramer-Rao machinery.

Scatter asymptotics all share the two-coefficient structure

    R = sigma1 (I + K)(S x S) + sigma2 vec(S) vec(S)^T,

kept factored in :class:`ellipsym.matrixkit.StructuredCov`.  The
Fisher-information engine assembles, for real, circular-complex and
noncircular-complex data, the structured form

    FIM(alpha) = a0 J_mu^H S^-1 J_mu
               + J_s^H (a1 (S^-T x S^-1) + a2 vec(S^-1) vec(S^-1)^H) J_s

per sample, with family coefficients (a0, a1, a2) derived from (xi1, xi2).
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import families
from .families import q_law, sb_xi, score_phi
from .matrixkit import StructuredCov, commutation, duplication, vec
from .sampling import DistributionSpec, composite_real_spec

__all__ = [
    "EstimatorAsymptotics",
    "SingularFIM",
    "scm_asymptotics",
    "ml_asymptotics",
    "m_asymptotics",
    "tyler_asymptotics",
    "shape_asymptotics",
    "maronna_sigma",
    "ParametricModel",
    "validate_jacobians",
    "built_in_model",
    "MODEL_NAMES",
    "slepian_bangs_fim",
    "crb",
    "fim_block_decoupling_check",
    "DecouplingReport",
]

JACOBIAN_CHECK_RTOL = 1e-5


class SingularFIM(ValueError):
    """Fisher information is singular: the parameterization is not identifiable."""


@dataclass(frozen=True)
class EstimatorAsymptotics:
    """Asymptotic covariances: r_mu (or None for scatter-only estimators)
    and the structured covariance of sqrt(n) vec(Sigma_hat - target)."""

    r_mu: np.ndarray
    r_sigma: StructuredCov
    sigma0: float = None


def scm_asymptotics(kernel, sigma):
    """Asymptotic covariance of the sample covariance matrix.

    sigma1 = 1 + kappa, sigma2 = kappa; requires finite fourth moments.
    """
    kappa = families.kurtosis(kernel)
    if not np.isfinite(kappa):
        raise ValueError("SCM asymptotics need finite fourth moments (kappa finite)")
    return EstimatorAsymptotics(
        r_mu=None, r_sigma=StructuredCov(1.0 + kappa, kappa, sigma)
    )


def ml_asymptotics(kernel, sigma, method="auto"):
    """Asymptotic covariance of the ML estimate for the kernel.

    sigma1 = m(m+2)/E[Q^2 phi^2] = 1/xi2, sigma0 = m/E[Q phi^2] = 1/xi1,
    and sigma2 = -2 sigma1 (1 - sigma1) / (2 + m (1 - sigma1)).
    """
    if kernel.is_complex:
        raise ValueError("estimator asymptotics cover real kernels")
    m = kernel.dim
    xi1, xi2 = sb_xi(kernel, method=method)
    sigma1 = 1.0 / xi2
    sigma0 = 1.0 / xi1
    sigma2 = -2.0 * sigma1 * (1.0 - sigma1) / (2.0 + m * (1.0 - sigma1))
    sigma = np.asarray(sigma, dtype=float)
    return EstimatorAsymptotics(
        r_mu=sigma0 * sigma,
        r_sigma=StructuredCov(sigma1, sigma2, sigma),
        sigma0=sigma0,
    )


def maronna_sigma(kernel, u2, bracket=(1e-6, 1e6)):
    """Solve E[sigma Q u2(sigma Q)] = m for the consistency scale sigma."""
    law = q_law(kernel)
    m = kernel.dim
    psi2 = lambda t: t * u2(t)

    def h(s):
        return law.expect(lambda q: psi2(s * q)) - m

    lo, hi = 1.0, 1.0
    if h(1.0) < 0:
        while h(hi) < 0:
            hi *= 2.0
            if hi > bracket[1]:
                raise ValueError("consistency scale sigma not bracketed above")
    else:
        while h(lo) > 0:
            lo /= 2.0
            if lo < bracket[0]:
                raise ValueError("consistency scale sigma not bracketed below")
    return optimize.brentq(h, lo, hi, xtol=1e-12)


def _fd(fn, t, rel=1e-6):
    t = np.asarray(t, dtype=float)
    h = rel * np.maximum(np.abs(t), 1e-3)
    return (fn(t + h) - fn(t - h)) / (2 * h)


def m_asymptotics(kernel, u1, u2, sigma, dpsi1=None, dpsi2=None):
    """Asymptotic covariances of the Maronna M-estimate with weights (u1, u2).

    The estimate converges to (mu, V = Sigma/sigma) with sigma the
    consistency scale; R_mu = (alpha / (sigma beta^2)) Sigma and R_Sigma is
    structured on V with

        sigma1 = (m+2)^2 a1 / (2 a2 + m)^2,
        sigma2 = a2^-2 [ (a1 - 1) - 2 (a2 - 1) a1 (m + (m+4) a2) / (2 a2 + m)^2 ],

    a1 = E[psi2^2(sQ)]/(m(m+2)), a2 = E[sQ psi2'(sQ)]/m.  Derivative
    callbacks for psi1/psi2 may be supplied; smooth weights fall back to
    central differences.
    """
    if kernel.is_complex:
        raise ValueError("estimator asymptotics cover real kernels")
    m = kernel.dim
    law = q_law(kernel)
    s = maronna_sigma(kernel, u2)
    psi1 = lambda t: t * u1(t)
    psi2 = lambda t: t * u2(t)
    d1 = dpsi1 if dpsi1 is not None else (lambda t: _fd(psi1, t))
    d2 = dpsi2 if dpsi2 is not None else (lambda t: _fd(psi2, t))

    alpha = law.expect(lambda q: psi1(np.sqrt(s * q)) ** 2) / m
    beta = law.expect(
        lambda q: (1 - 1 / m) * u1(np.sqrt(s * q)) + d1(np.sqrt(s * q)) / m
    )
    a1 = law.expect(lambda q: psi2(s * q) ** 2) / (m * (m + 2))
    a2 = law.expect(lambda q: s * q * d2(s * q)) / m

    sigma1 = (m + 2) ** 2 * a1 / (2 * a2 + m) ** 2
    sigma2 = ((a1 - 1) - 2 * (a2 - 1) * a1 * (m + (m + 4) * a2) / (2 * a2 + m) ** 2) / a2**2
    sigma = np.asarray(sigma, dtype=float)
    v = sigma / s
    return EstimatorAsymptotics(
        r_mu=(alpha / (s * beta**2)) * sigma,
        r_sigma=StructuredCov(sigma1, sigma2, v),
        sigma0=alpha / beta**2,
    )


def tyler_asymptotics(m, sigma):
    """Asymptotic covariance of the trace-normalized Tyler estimate.

    sigma1 = 1 + 2/m and sigma2 = -(2/m) sigma1: the lower bound
    sigma2 >= -2 sigma1 / m holds with equality.  The base scatter is
    normalized to tr = m, the convention the estimator enforces.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma = m * sigma / np.trace(sigma)
    sigma1 = 1.0 + 2.0 / m
    sigma2 = -(2.0 / m) * sigma1
    return EstimatorAsymptotics(r_mu=None, r_sigma=StructuredCov(sigma1, sigma2, sigma))


def _shape_projector(v, scale):
    m = v.shape[0]
    eye = np.eye(m * m)
    vv = vec(v)
    if scale == "topleft":
        e1 = np.zeros(m * m)
        e1[0] = 1.0
        return eye - np.outer(vv, e1)
    if scale == "trace":
        return eye - np.outer(vv, vec(np.eye(m))) / m
    if scale == "det":
        return eye - np.outer(vv, vec(np.linalg.inv(v))) / m
    raise ValueError(f"unknown shape scale {scale!r}")


def shape_asymptotics(asym, scale):
    """Delta-method covariance of the shape estimate V_hat = Sigma_hat/s(Sigma_hat).

    R_V = sigma1 P_s(V) (I + K)(V x V) P_s(V)^T; the rank-one sigma2 term is
    annihilated because P_s(V) vec(V) = 0 for any degree-one scale
    functional.  Returns the dense m^2 x m^2 matrix.
    """
    from .estimators import shape_normalize

    s = asym.r_sigma
    v = shape_normalize(s.base, scale)
    m = v.shape[0]
    proj = _shape_projector(v, scale)
    core = (np.eye(m * m) + commutation(m, m)) @ np.kron(v, v)
    return s.sigma1 * proj @ core @ proj.T


# ---------------------------------------------------------------------------
# Slepian-Bangs engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricModel:
    """Differentiable map alpha -> (mu(alpha), Sigma(alpha) [, Omega(alpha)]).

    Jacobians follow the layout d mu / d alpha^T (m x p) and
    d vec(Sigma) / d alpha^T (m^2 x p); all parameters are real.
    """

    name: str
    p: int
    realness: str
    mu: callable
    sigma: callable
    jac_mu: callable
    jac_sigma: callable
    omega: callable = None
    jac_omega: callable = None
    mu_param_idx: tuple = None
    sigma_param_idx: tuple = None


def _fd_jacobian(fn, alpha, rel=1e-6):
    alpha = np.asarray(alpha, dtype=float)
    cols = []
    for j in range(alpha.size):
        h = rel * max(abs(alpha[j]), 1.0)
        up = alpha.copy()
        dn = alpha.copy()
        up[j] += h
        dn[j] -= h
        cols.append((np.asarray(fn(up)) - np.asarray(fn(dn))).ravel(order="F") / (2 * h))
    return np.column_stack(cols)


def validate_jacobians(model, alpha, rtol=JACOBIAN_CHECK_RTOL):
    """Check the model's Jacobian callbacks against central differences."""
    pairs = [(model.mu, model.jac_mu), (lambda a: model.sigma(a), model.jac_sigma)]
    if model.omega is not None:
        pairs.append((model.omega, model.jac_omega))
    for fn, jac in pairs:
        got = np.asarray(jac(alpha))
        ref = _fd_jacobian(fn, alpha)
        scale = max(np.abs(ref).max(), 1.0)
        if np.abs(got - ref).max() > rtol * scale:
            raise ValueError(
                f"model {model.name!r}: Jacobian mismatch vs finite differences "
                f"(max abs dev {np.abs(got - ref).max():.3e})"
            )
    return True


def _sb_coefficients(kernel):
    """(a0, a1, a2) per realness from the kernel's (xi1, xi2)."""
    xi1, xi2 = sb_xi(kernel)
    if kernel.realness == families.REAL:
        return xi1, xi2 / 2.0, (xi2 - 1.0) / 4.0
    if kernel.realness == families.NONCIRCULAR:
        return xi1, xi2 / 2.0, (xi2 - 1.0) / 4.0
    return 2.0 * xi1, xi2, xi2 - 1.0


def _extended(model, alpha):
    """mu-tilde, Sigma-tilde and their Jacobians for the noncircular path."""
    m = np.asarray(model.mu(alpha)).shape[0]
    mu = np.asarray(model.mu(alpha), dtype=complex)
    sig = np.asarray(model.sigma(alpha), dtype=complex)
    om = (
        np.asarray(model.omega(alpha), dtype=complex)
        if model.omega is not None
        else np.zeros((m, m), dtype=complex)
    )
    jmu = np.asarray(model.jac_mu(alpha), dtype=complex)
    jsig = np.asarray(model.jac_sigma(alpha), dtype=complex)
    jom = (
        np.asarray(model.jac_omega(alpha), dtype=complex)
        if model.jac_omega is not None
        else np.zeros((m * m, jsig.shape[1]), dtype=complex)
    )
    mu_t = np.concatenate([mu, mu.conj()])
    sig_t = np.block([[sig, om], [om.conj(), sig.conj()]])
    jmu_t = np.vstack([jmu, jmu.conj()])
    p = jsig.shape[1]
    jsig_t = np.empty((4 * m * m, p), dtype=complex)
    for j in range(p):
        ds = jsig[:, j].reshape(m, m, order="F")
        do = jom[:, j].reshape(m, m, order="F")
        dt = np.block([[ds, do], [do.conj(), ds.conj()]])
        jsig_t[:, j] = dt.ravel(order="F")
    return mu_t, sig_t, jmu_t, jsig_t


def slepian_bangs_fim(model, kernel, alpha, validate=True):
    """Per-sample Fisher information matrix of alpha under the kernel.

    Real data:

        FIM = a0 Jmu^T S^-1 Jmu
            + Jsig^T (a1 (S^-1 x S^-1) + a2 vec(S^-1) vec(S^-1)^T) Jsig,

    (a0, a1, a2) = (xi1, xi2/2, (xi2-1)/4).  Circular complex data use
    (2 xi1, xi2, xi2 - 1) with Re(Jmu^H S^-1 Jmu) and conjugate transposes;
    noncircular data apply the real-form coefficients to the extended
    quantities mu-tilde, Sigma-tilde.  The result is symmetric PSD.
    """
    if model.realness != kernel.realness:
        raise ValueError(
            f"model realness {model.realness!r} != kernel realness {kernel.realness!r}"
        )
    if validate:
        validate_jacobians(model, alpha)
    a0, a1, a2 = _sb_coefficients(kernel)
    if kernel.realness == families.NONCIRCULAR:
        mu_t, sig_t, jmu, jsig = _extended(model, alpha)
        sig_inv = np.linalg.inv(sig_t)
    else:
        dtype = complex if kernel.is_complex else float
        jmu = np.asarray(model.jac_mu(alpha), dtype=dtype)
        jsig = np.asarray(model.jac_sigma(alpha), dtype=dtype)
        sig_inv = np.linalg.inv(np.asarray(model.sigma(alpha), dtype=dtype))
    mu_term = jmu.conj().T @ sig_inv @ jmu
    vinv = sig_inv.ravel(order="F")
    middle = a1 * np.kron(sig_inv.T, sig_inv) + a2 * np.outer(vinv, vinv.conj())
    sig_term = jsig.conj().T @ middle @ jsig
    fim = a0 * np.real(mu_term) + np.real(sig_term)
    return 0.5 * (fim + fim.T)


def crb(model, kernel, alpha, n=1, validate=True):
    """Cramer-Rao bound for n i.i.d. samples: (n FIM)^-1.

    A singular FIM raises :class:`SingularFIM` with the near-null directions
    reported.
    """
    fim = slepian_bangs_fim(model, kernel, alpha, validate=validate)
    w, v = np.linalg.eigh(fim)
    tol = fim.shape[0] * np.finfo(float).eps * max(w[-1], 0.0)
    if w[0] <= tol:
        null = v[:, w <= tol]
        raise SingularFIM(
            f"FIM singular (min eig {w[0]:.3e}); null directions:\n{null.round(6)}"
        )
    return np.linalg.inv(fim) / n


@dataclass(frozen=True)
class DecouplingReport:
    disjoint: bool
    off_block_norm: float
    coupled: bool
    mu_params: tuple
    sigma_params: tuple


def fim_block_decoupling_check(model, kernel, alpha, tol=1e-10):
    """Report the coupling between location and scatter parameter blocks.

    For models whose mu- and Sigma-parameters are disjoint, the
    off-diagonal FIM block vanishes for every elliptical kernel.
    """
    fim = slepian_bangs_fim(model, kernel, alpha)
    if model.mu_param_idx is not None:
        mu_idx = tuple(model.mu_param_idx)
        sig_idx = tuple(model.sigma_param_idx or ())
    else:
        jmu = np.abs(np.asarray(model.jac_mu(alpha)))
        jsig = np.abs(np.asarray(model.jac_sigma(alpha)))
        mu_idx = tuple(np.flatnonzero(jmu.max(axis=0) > 0).tolist())
        sig_idx = tuple(np.flatnonzero(jsig.max(axis=0) > 0).tolist())
    disjoint = not set(mu_idx) & set(sig_idx)
    if disjoint and mu_idx and sig_idx:
        block = fim[np.ix_(mu_idx, sig_idx)]
        off = float(np.abs(block).max())
    else:
        off = float("nan") if not disjoint else 0.0
    coupled = (not disjoint) or (disjoint and mu_idx and sig_idx and off > tol)
    return DecouplingReport(
        disjoint=bool(disjoint),
        off_block_norm=off,
        coupled=bool(coupled),
        mu_params=mu_idx,
        sigma_params=sig_idx,
    )


MODEL_NAMES = (
    "location-scalar",
    "location-vector",
    "scatter-full",
    "scatter-scaled-identity",
)


def built_in_model(name, m, sigma=None, mu=None, realness=families.REAL):
    """Construct one of the built-in parametric models at dimension m.

    location-scalar:          mu(a) = a * 1, Sigma fixed          (p = 1)
    location-vector:          mu(a) = a, Sigma fixed              (p = m)
    scatter-full:             alpha = vecs(Sigma), mu fixed       (p = m(m+1)/2)
    scatter-scaled-identity:  Sigma(a) = a I, mu fixed            (p = 1)
    """
    is_complex = realness != families.REAL
    dtype = complex if is_complex else float
    sigma0 = np.eye(m, dtype=dtype) if sigma is None else np.asarray(sigma, dtype=dtype)
    mu0 = np.zeros(m, dtype=dtype) if mu is None else np.asarray(mu, dtype=dtype)
    ones = np.ones(m, dtype=dtype)

    if name == "location-scalar":
        return ParametricModel(
            name=name,
            p=1,
            realness=realness,
            mu=lambda a: a[0] * ones,
            sigma=lambda a: sigma0,
            jac_mu=lambda a: ones.reshape(m, 1),
            jac_sigma=lambda a: np.zeros((m * m, 1)),
            mu_param_idx=(0,),
            sigma_param_idx=(),
        )
    if name == "location-vector":
        return ParametricModel(
            name=name,
            p=m,
            realness=realness,
            mu=lambda a: np.asarray(a, dtype=dtype),
            sigma=lambda a: sigma0,
            jac_mu=lambda a: np.eye(m, dtype=dtype),
            jac_sigma=lambda a: np.zeros((m * m, m)),
            mu_param_idx=tuple(range(m)),
            sigma_param_idx=(),
        )
    if name == "scatter-full":
        if is_complex:
            raise ValueError("scatter-full is a real-parameter model")
        dup = duplication(m)
        from .matrixkit import unvecs

        return ParametricModel(
            name=name,
            p=m * (m + 1) // 2,
            realness=realness,
            mu=lambda a: mu0,
            sigma=lambda a: unvecs(np.asarray(a, dtype=float), m),
            jac_mu=lambda a: np.zeros((m, m * (m + 1) // 2)),
            jac_sigma=lambda a: dup,
            mu_param_idx=(),
            sigma_param_idx=tuple(range(m * (m + 1) // 2)),
        )
    if name == "scatter-scaled-identity":
        eye_vec = vec(np.eye(m)).astype(dtype)
        return ParametricModel(
            name=name,
            p=1,
            realness=realness,
            mu=lambda a: mu0,
            sigma=lambda a: a[0] * np.eye(m, dtype=dtype),
            jac_mu=lambda a: np.zeros((m, 1)),
            jac_sigma=lambda a: eye_vec.reshape(-1, 1),
            mu_param_idx=(),
            sigma_param_idx=(0,),
        )
    raise ValueError(f"unknown model {name!r}; choices: {MODEL_NAMES}")
