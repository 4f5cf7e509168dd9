"""Joint location/scatter estimation for elliptical samples.

Implements the sample moments, the maximum-likelihood fixed point for a
given kernel, Maronna-type M-estimators with the scale-adjusted fixed
point when the center is known, and Tyler's distribution-free scatter
estimator.  All fits are deterministic given the data.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .families import score_phi, score_phi_deriv
from .matrixkit import NotPositiveDefinite, quad_forms

__all__ = [
    "EstimatorConfig",
    "EstimateResult",
    "NonConvergence",
    "sample_moments",
    "fit_ml",
    "fit_maronna",
    "fit_tyler",
    "shape_normalize",
    "shape_scale_value",
    "huber_weights",
    "ml_weights",
]

SHAPE_SCALES = ("trace", "topleft", "det")


class NonConvergence(RuntimeError):
    """Fixed-point iteration exhausted max_iter without meeting tolerance."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Iteration controls shared by the fitting routines.

    ``known_mu = None`` requests joint (mu, Sigma) estimation; otherwise the
    center is held fixed at the given vector.  ``tol`` is a relative change
    (Frobenius for Sigma, Euclidean for mu); Tyler instead tracks the
    implicit-equation residual.
    """

    max_iter: int = 200
    tol: float = 1e-10
    known_mu: np.ndarray = None
    shape_scale: str = None
    raise_on_failure: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.shape_scale is not None and self.shape_scale not in SHAPE_SCALES:
            raise ValueError(f"shape_scale must be one of {SHAPE_SCALES}")
        if self.known_mu is not None:
            object.__setattr__(
                self, "known_mu", np.asarray(self.known_mu, dtype=float)
            )


@dataclass(frozen=True)
class EstimateResult:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    iterations: int
    residual_trace: tuple
    converged: bool
    scale_constraint_applied: str = None
    singular: bool = False
    nll_trace: tuple = ()
    nll_monotone: bool = True


def shape_scale_value(sigma, scale):
    """Scale functional s(Sigma): trace/m, top-left entry, or |Sigma|^(1/m)."""
    sigma = np.asarray(sigma)
    m = sigma.shape[0]
    if scale == "trace":
        return float(np.trace(sigma)) / m
    if scale == "topleft":
        val = float(sigma[0, 0])
        if val <= 0:
            raise ValueError("top-left entry must be positive")
        return val
    if scale == "det":
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            raise ValueError("determinant scale requires a PD matrix")
        return float(np.exp(logdet / m))
    raise ValueError(f"unknown shape scale {scale!r}")


def shape_normalize(sigma, scale):
    """Shape matrix V = Sigma / s(Sigma); s(V) = 1 and the map is idempotent."""
    return np.asarray(sigma, dtype=float) / shape_scale_value(sigma, scale)


def _apply_shape(sigma, cfg):
    if cfg.shape_scale is None:
        return sigma, None
    return shape_normalize(sigma, cfg.shape_scale), cfg.shape_scale


def _check_pd(sigma, context):
    w = np.linalg.eigvalsh(sigma)
    if w[0] <= 0:
        raise NotPositiveDefinite(
            f"{context}: iterate lost positive definiteness (min eig {w[0]:.3e}); "
            "the model assumptions are likely violated for this data"
        )


def sample_moments(data):
    """Sample mean and the unbiased sample covariance matrix.

    Flags (rather than raises on) singular covariances so degenerate data
    can be inspected.
    """
    data = np.asarray(data, dtype=float)
    n, m = data.shape
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    mu = data.mean(axis=0)
    centered = data - mu
    sigma = centered.T @ centered / (n - 1)
    singular = bool(np.linalg.eigvalsh(sigma)[0] <= n * np.finfo(float).eps * max(
        np.linalg.eigvalsh(sigma)[-1], 0.0
    ))
    return EstimateResult(
        mu_hat=mu,
        sigma_hat=sigma,
        iterations=1,
        residual_trace=(0.0,),
        converged=True,
        singular=singular,
    )


def _neg_log_lik(data, kernel, mu, sigma):
    from .families import log_density_generator

    n = data.shape[0]
    q = quad_forms(data, mu, sigma)
    sign, logdet = np.linalg.slogdet(sigma)
    return float(n / 2 * logdet - np.sum(log_density_generator(kernel, q)))


def fit_ml(data, kernel, cfg=EstimatorConfig()):
    """Maximum-likelihood location/scatter for the given kernel.

    Alternates the weighted-mean and weighted-covariance fixed points
    with weights phi(Q_i).  For the Gaussian kernel this converges in one
    step to the sample mean and the biased (1/n) covariance.  The negative
    log-likelihood is monitored; an increase is flagged, not hidden.
    """
    data = np.asarray(data, dtype=float)
    n, m = data.shape
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    if kernel.dim != m:
        raise ValueError(f"kernel dimension {kernel.dim} != data dimension {m}")
    known_mu = cfg.known_mu
    mu = np.median(data, axis=0) if known_mu is None else known_mu
    centered = data - mu
    sigma = centered.T @ centered / n
    _check_pd(sigma, "fit_ml init")
    residuals = []
    nlls = [_neg_log_lik(data, kernel, mu, sigma)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        q = quad_forms(data, mu, sigma)
        w = score_phi(kernel, q)
        if known_mu is None:
            mu_new = w @ data / w.sum()
        else:
            mu_new = mu
        centered = data - mu_new
        sigma_new = (w[:, None] * centered).T @ centered / n
        _check_pd(sigma_new, "fit_ml")
        dmu = np.linalg.norm(mu_new - mu) / max(np.linalg.norm(mu), 1e-30)
        dsig = np.linalg.norm(sigma_new - sigma, "fro") / np.linalg.norm(sigma, "fro")
        res = max(dmu, dsig)
        residuals.append(res)
        mu, sigma = mu_new, sigma_new
        nlls.append(_neg_log_lik(data, kernel, mu, sigma))
        if res < cfg.tol:
            converged = True
            break
    if not converged and cfg.raise_on_failure:
        raise NonConvergence(f"fit_ml: residual {residuals[-1]:.3e} after {it} iterations")
    nll_arr = np.array(nlls)
    monotone = bool(np.all(np.diff(nll_arr) <= 1e-8 * np.abs(nll_arr[:-1]) + 1e-8))
    sigma, applied = _apply_shape(sigma, cfg)
    return EstimateResult(
        mu_hat=mu,
        sigma_hat=sigma,
        iterations=it,
        residual_trace=tuple(residuals),
        converged=converged,
        scale_constraint_applied=applied,
        nll_trace=tuple(nlls),
        nll_monotone=monotone,
    )


def _solve_ck(psi2, q, m, xtol=1e-12):
    """Unique c with mean(psi2(c q)) = m, by bisection on a grown bracket."""

    def h(c):
        return float(np.mean(psi2(c * q)) - m)

    lo = hi = 1.0
    hlo = h(1.0)
    if hlo < 0:
        for _ in range(200):
            hi *= 2.0
            if h(hi) >= 0:
                break
            lo = hi
        else:
            raise NonConvergence("scale adjustment c_k could not be bracketed above")
    else:
        for _ in range(200):
            lo /= 2.0
            if h(lo) <= 0:
                break
            hi = lo
        else:
            raise NonConvergence("scale adjustment c_k could not be bracketed below")
    from scipy.optimize import bisect

    return bisect(h, lo, hi, xtol=xtol)


def fit_maronna(data, u1, u2, cfg=EstimatorConfig()):
    """Maronna M-estimation with weights u1 (location) and u2 (scatter).

    Known-center mode runs the scale-adjusted fixed point: starting from
    the (1/n) second-moment matrix,

        Sigma_{k+1} = (1/n) sum_i u2(c_k Q_ik) x_i x_i^T,

    with c_k solving (1/n) sum_i psi2(c_k Q_ik) = m, psi2(t) = t u2(t).
    Joint mode alternates a u1-weighted center update with the same scatter
    step; no joint convergence theory exists for it, so the convergence
    flag must be checked by the caller.
    """
    data = np.asarray(data, dtype=float)
    n, m = data.shape
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    known_mu = cfg.known_mu
    psi2 = lambda t: t * u2(t)
    mu = np.median(data, axis=0) if known_mu is None else known_mu
    centered = data - mu
    sigma = centered.T @ centered / n
    _check_pd(sigma, "fit_maronna init")
    residuals = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if known_mu is None:
            q = quad_forms(data, mu, sigma)
            w1 = u1(np.sqrt(q))
            mu_new = w1 @ data / w1.sum()
        else:
            mu_new = mu
        centered = data - mu_new
        q = quad_forms(data, mu_new, sigma)
        ck = _solve_ck(psi2, q, m)
        w2 = u2(ck * q)
        sigma_new = (w2[:, None] * centered).T @ centered / n
        _check_pd(sigma_new, "fit_maronna")
        dmu = np.linalg.norm(mu_new - mu) / max(np.linalg.norm(mu), 1e-30)
        dsig = np.linalg.norm(sigma_new - sigma, "fro") / np.linalg.norm(sigma, "fro")
        res = max(dmu, dsig)
        residuals.append(res)
        mu, sigma = mu_new, sigma_new
        if res < cfg.tol:
            converged = True
            break
    if not converged and cfg.raise_on_failure:
        raise NonConvergence(
            f"fit_maronna: residual {residuals[-1]:.3e} after {it} iterations"
        )
    sigma, applied = _apply_shape(sigma, cfg)
    return EstimateResult(
        mu_hat=mu,
        sigma_hat=sigma,
        iterations=it,
        residual_trace=tuple(residuals),
        converged=converged,
        scale_constraint_applied=applied,
    )


def fit_tyler(data, cfg):
    """Tyler's scatter estimator about a known center.

    Iterates Sigma' = (m/n) sum_i x_i x_i^T / (x_i^T Sigma^-1 x_i) followed
    by trace renormalization to m.  The residual traced per iteration is
    the implicit-equation defect |Sigma - T(Sigma)|_F / |Sigma|_F, which a
    fixed point drives to zero; the result satisfies tr(Sigma_hat) = m.
    Zero samples are rejected (their direction is undefined).
    """
    if cfg.known_mu is None:
        raise ValueError("Tyler's estimator requires a known center (known_mu)")
    data = np.asarray(data, dtype=float) - cfg.known_mu
    n, m = data.shape
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    norms = np.linalg.norm(data, axis=1)
    zero = norms == 0.0
    if zero.any():
        raise ValueError(f"{int(zero.sum())} zero sample(s); directions undefined")
    sigma = np.eye(m)
    residuals = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        q = quad_forms(data, np.zeros(m), sigma)
        t_sigma = (m / n) * (data / q[:, None]).T @ data
        res = np.linalg.norm(sigma - t_sigma, "fro") / np.linalg.norm(sigma, "fro")
        residuals.append(res)
        if res < cfg.tol:
            converged = True
            break
        sigma = m * t_sigma / np.trace(t_sigma)
        _check_pd(sigma, "fit_tyler")
    if not converged and cfg.raise_on_failure:
        raise NonConvergence(
            f"fit_tyler: residual {residuals[-1]:.3e} after {it} iterations"
        )
    return EstimateResult(
        mu_hat=cfg.known_mu,
        sigma_hat=sigma,
        iterations=it,
        residual_trace=tuple(residuals),
        converged=converged,
        scale_constraint_applied="trace",
    )


def huber_weights(m, quantile=0.9):
    """Huber weight pair (u1, u2) normalized for the Gaussian model.

    u2(t) = min(1, k2/t)/b with k2 the chi-square quantile and b chosen so
    that E[t u2(t)] = m under chi2_m, which makes the Gaussian the neutral
    model (sigma = 1).  Returns (u1, u2, dpsi1, dpsi2) with the almost-
    everywhere derivatives of psi_i used by the asymptotic formulas.
    """
    chi = stats.chi2(m)
    k2 = chi.ppf(quantile)
    b = (chi.expect(lambda q: np.minimum(q, k2))) / m
    k = np.sqrt(k2)

    def u2(t):
        t = np.asarray(t, dtype=float)
        return np.minimum(1.0, k2 / np.maximum(t, 1e-300)) / b

    def u1(t):
        t = np.asarray(t, dtype=float)
        return np.minimum(1.0, k / np.maximum(t, 1e-300))

    def dpsi2(t):
        return np.where(np.asarray(t, dtype=float) < k2, 1.0 / b, 0.0)

    def dpsi1(t):
        return np.where(np.asarray(t, dtype=float) < k, 1.0, 0.0)

    return u1, u2, dpsi1, dpsi2


def ml_weights(kernel):
    """Weight functions that make the M-estimator coincide with the ML fit.

    u1(t) = u2(t^2) = phi(t^2); the derivative callbacks are exact.
    Returns (u1, u2, dpsi1, dpsi2).
    """

    def u2(t):
        return score_phi(kernel, t)

    def u1(t):
        return score_phi(kernel, np.asarray(t, dtype=float) ** 2)

    def dpsi2(t):
        t = np.asarray(t, dtype=float)
        return score_phi(kernel, t) + t * score_phi_deriv(kernel, t)

    def dpsi1(t):
        t = np.asarray(t, dtype=float)
        return score_phi(kernel, t**2) + 2 * t**2 * score_phi_deriv(kernel, t**2)

    return u1, u2, dpsi1, dpsi2
