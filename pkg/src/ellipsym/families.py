"""Distribution-family registry.

Each family kernel bundles, for one elliptical family at one dimension:

* the density generator g and its log,
* the score function phi(t) = -2 g'(t) / g(t),
* the law of the second-order modular variate Q (the Mahalanobis form),
* the texture law for compound-Gaussian families,
* the marginal kurtosis parameter,
* the information coefficients (xi1, xi2) used by the Fisher-information
  formulas.

Scale convention.  A family's textbook parameterization ("raw") leaves the
scatter matrix only proportional to the covariance.  Kernels therefore carry
a positive factor ``q_scale`` (zeta below): the effective quantities are

    Q_eff = Q_raw / zeta,   g_eff(t) = zeta^(m/2) g_raw(zeta t),
    phi_eff(t) = zeta phi_raw(zeta t),   tau_eff = tau_raw / zeta,

so that the pair (Sigma, effective kernel) describes the same law as
(zeta Sigma, raw kernel).  ``scale="cov"`` picks zeta = E(Q_raw)/m, making
E(Q) = m and cov(x) = Sigma; when E(Q) is infinite the median rule
Median(Q) = 1 is used instead.

Complex kernels of dimension m are backed by the real kernel of dimension
2m through g_c(t) = 2^m g_r(2t) and Q_c = Q_{r,2m} / 2.
"""

import math
import re
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize, special, stats

__all__ = [
    "REAL",
    "CIRCULAR",
    "NONCIRCULAR",
    "FamilyKernel",
    "QLaw",
    "TextureLaw",
    "gaussian",
    "student",
    "gg",
    "kdist",
    "epscont",
    "make_kernel",
    "parse_family",
    "rescale_kernel",
    "scale_normalize",
    "delta_norm",
    "log_density_generator",
    "density_generator",
    "score_phi",
    "score_phi_deriv",
    "q_law",
    "texture_law",
    "kurtosis",
    "sb_xi",
]

REAL = "real"
CIRCULAR = "complex-circular"
NONCIRCULAR = "complex-noncircular"

FAMILIES = ("gaussian", "student", "gg", "k", "epscont")
CG_FAMILIES = ("gaussian", "student", "k", "epscont")

QUAD_EPSREL = 1e-8
QUAD_EPSABS = 1e-12
MEDIAN_XTOL = 1e-10


@dataclass(frozen=True)
class FamilyKernel:
    """One elliptical family at one dimension, with a fixed scale convention.

    ``dim`` is the dimension of the observed vector (the complex dimension
    for complex kernels).  ``q_scale`` is the zeta factor described in the
    module docstring; ``scale`` is its provenance label (raw/cov/median).
    """

    family: str
    dim: int
    realness: str = REAL
    nu: float = None
    s: float = None
    b: float = None
    eps: float = None
    a2: float = None
    q_scale: float = 1.0
    scale: str = "raw"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.realness not in (REAL, CIRCULAR, NONCIRCULAR):
            raise ValueError(f"unknown realness {self.realness!r}")
        if self.q_scale <= 0:
            raise ValueError("q_scale must be positive")
        if self.family in ("student", "k") and not (self.nu and self.nu > 0):
            raise ValueError("nu must be > 0")
        if self.family == "gg":
            if not (self.s and self.s > 0 and self.b and self.b > 0):
                raise ValueError("gg requires s > 0 and b > 0")
        if self.family == "epscont":
            if not (self.eps is not None and 0 < self.eps < 1):
                raise ValueError("epscont requires 0 < eps < 1")
            if not (self.a2 and self.a2 > 0):
                raise ValueError("epscont requires a2 > 0")

    @property
    def is_complex(self):
        return self.realness != REAL

    @property
    def real_dim(self):
        """Dimension of the underlying real representation."""
        return 2 * self.dim if self.is_complex else self.dim

    @property
    def is_cg(self):
        """True when the family is compound Gaussian (has a texture law)."""
        return self.family in CG_FAMILIES

    def describe(self):
        if self.family == "gaussian":
            head = "gaussian"
        elif self.family == "student":
            head = f"student(nu={self.nu:g})"
        elif self.family == "gg":
            head = f"gg(s={self.s:g}, b={self.b:g})"
        elif self.family == "k":
            head = f"k(nu={self.nu:g})"
        else:
            head = f"epscont(eps={self.eps:g}, a2={self.a2:g})"
        return f"{head} dim={self.dim} {self.realness} scale={self.scale}"


@dataclass(frozen=True)
class QLaw:
    """Law of the second-order modular variate Q of a kernel."""

    dim: int
    description: str
    pdf: callable
    logpdf: callable
    cdf: callable
    sample: callable  # sample(rng, size) -> ndarray
    mean: float  # E(Q), may be inf
    second_moment: float  # E(Q^2), may be inf

    def median(self):
        """Median of Q by bisection on the cdf."""
        lo, hi = 1e-12, 1.0
        while self.cdf(hi) < 0.5:
            hi *= 4.0
            if hi > 1e300:
                raise RuntimeError("median bracket failed")
        while self.cdf(lo) > 0.5:
            lo /= 4.0
        return optimize.bisect(lambda q: self.cdf(q) - 0.5, lo, hi, xtol=MEDIAN_XTOL)

    def expect(self, fn, epsrel=QUAD_EPSREL, epsabs=QUAD_EPSABS):
        """Adaptive quadrature of E[fn(Q)] against the Q density."""

        def integrand(q):
            return fn(q) * self.pdf(q)

        mid = self.median()
        lo, err_lo = integrate.quad(
            integrand, 0.0, mid, epsrel=epsrel, epsabs=epsabs, limit=200
        )
        hi, err_hi = integrate.quad(
            integrand, mid, np.inf, epsrel=epsrel, epsabs=epsabs, limit=200
        )
        total = lo + hi
        if not np.isfinite(total):
            raise ValueError("divergent Q-law expectation")
        return total


@dataclass(frozen=True)
class TextureLaw:
    """Law of the positive mixing variable of a compound-Gaussian kernel."""

    description: str
    mean: float
    var: float
    sample: callable  # sample(rng, size)
    cdf: callable
    pdf: callable = None  # None for discrete laws
    atoms: tuple = None  # ((value, prob), ...) for discrete laws

    @property
    def is_degenerate(self):
        return self.atoms is not None and len(self.atoms) == 1


def delta_norm(m):
    """Normalization Gamma(m/2) / pi^(m/2) of the m-dimensional spherical pdf."""
    return math.exp(special.gammaln(m / 2) - (m / 2) * math.log(math.pi))


# ---------------------------------------------------------------------------
# raw (textbook-parameterization) building blocks, all at real dimension m
# ---------------------------------------------------------------------------


def _log_g_raw(kernel, m, t):
    """log g_raw(t) for the real m-dimensional member of the family."""
    t = np.asarray(t, dtype=float)
    fam = kernel.family
    if fam == "gaussian":
        return -(m / 2) * np.log(2 * np.pi) - t / 2
    if fam == "student":
        nu = kernel.nu
        return (
            special.gammaln((nu + m) / 2)
            - (m / 2) * np.log(nu * np.pi)
            - special.gammaln(nu / 2)
            - ((nu + m) / 2) * np.log1p(t / nu)
        )
    if fam == "gg":
        s, b = kernel.s, kernel.b
        return (
            np.log(s)
            + special.gammaln(m / 2)
            - (m / 2) * np.log(2 * np.pi)
            - (m / (2 * s)) * np.log(b)
            - special.gammaln(m / (2 * s))
            - t**s / (2**s * b)
        )
    if fam == "k":
        # raw pairs with the Gamma texture of mean 1/2; equals the unit-mean
        # texture form evaluated at 2t with the matching Jacobian factor.
        return (m / 2) * np.log(2.0) + _log_g_k_unit(kernel.nu, m, 2 * t)
    if fam == "epscont":
        eps, a2 = kernel.eps, kernel.a2
        la = np.log(eps) - (m / 2) * np.log(a2) - t / (2 * a2)
        lb = np.log1p(-eps) - t / 2
        return -(m / 2) * np.log(2 * np.pi) + np.logaddexp(la, lb)
    raise AssertionError(fam)


def _log_g_k_unit(nu, m, u):
    """log of the Bessel-form K density generator with unit-mean texture."""
    u = np.asarray(u, dtype=float)
    alpha = nu - m / 2
    out = np.empty(np.shape(u), dtype=float)
    base = (
        (m / 2) * np.log(nu)
        - (nu - 1) * np.log(2.0)
        - (m / 2) * np.log(np.pi)
        - special.gammaln(nu)
    )
    pos = u > 0
    z = np.sqrt(2 * nu * np.where(pos, u, 1.0))
    # kve(alpha, z) = K_alpha(z) exp(z) keeps large-argument evaluation finite
    out = np.where(
        pos, base + alpha * np.log(z) + np.log(special.kve(alpha, z)) - z, np.nan
    )
    if np.any(~pos):
        if alpha > 0:
            at0 = base + (alpha - 1) * np.log(2.0) + special.gammaln(alpha)
        else:
            at0 = np.inf  # generator diverges at the center
        out = np.where(pos, out, at0)
    return out if out.ndim else float(out)


def _phi_raw(kernel, m, t):
    """phi_raw(t) = -2 g_raw'(t) / g_raw(t) at real dimension m."""
    t = np.asarray(t, dtype=float)
    fam = kernel.family
    if fam == "gaussian":
        return np.ones_like(t)
    if fam == "student":
        nu = kernel.nu
        return (nu + m) / (nu + t)
    if fam == "gg":
        s, b = kernel.s, kernel.b
        return 2 * s * t ** (s - 1) / (2**s * b)
    if fam == "k":
        return 2.0 * _phi_k_unit(kernel.nu, m, 2 * t)
    if fam == "epscont":
        eps, a2 = kernel.eps, kernel.a2
        la = np.log(eps) - (m / 2) * np.log(a2) - t / (2 * a2)
        lb = np.log1p(-eps) - t / 2
        num = np.logaddexp(la - np.log(a2), lb)
        return np.exp(num - np.logaddexp(la, lb))
    raise AssertionError(fam)


def _phi_k_unit(nu, m, u):
    """Score of the unit-texture K generator via the Bessel recurrence.

    K_{a+1}(z) - K_{a-1}(z) = (2a/z) K_a(z) removes the cancellation in the
    naive derivative, leaving phi(u) = (2 nu / z) K_{a-1}(z) / K_a(z).
    """
    u = np.asarray(u, dtype=float)
    alpha = nu - m / 2
    z = np.sqrt(2 * nu * np.maximum(u, 0.0))
    tiny = z < 1e-12
    zsafe = np.where(tiny, 1.0, z)
    val = (2 * nu / zsafe) * special.kve(alpha - 1, zsafe) / special.kve(alpha, zsafe)
    if np.any(tiny):
        limit = nu / (alpha - 1) if alpha > 1 else np.inf
        val = np.where(tiny, limit, val)
    return val if val.ndim else float(val)


def _phi_deriv_raw(kernel, m, t):
    """d/dt of phi_raw; analytic where cheap, central differences otherwise."""
    t = np.asarray(t, dtype=float)
    fam = kernel.family
    if fam == "gaussian":
        return np.zeros_like(t)
    if fam == "student":
        nu = kernel.nu
        return -(nu + m) / (nu + t) ** 2
    if fam == "gg":
        s, b = kernel.s, kernel.b
        return 2 * s * (s - 1) * t ** (s - 2) / (2**s * b)
    if fam == "epscont":
        # phi = N/D with N = -2 D' and D proportional to g; then
        # phi' = -N2/(2D) + phi^2/2 where N2 = -2 N'.
        eps, a2 = kernel.eps, kernel.a2
        la = np.log(eps) - (m / 2) * np.log(a2) - t / (2 * a2)
        lb = np.log1p(-eps) - t / 2
        den = np.logaddexp(la, lb)
        num = np.logaddexp(la - np.log(a2), lb)
        num2 = np.logaddexp(la - 2 * np.log(a2), lb)
        phi = np.exp(num - den)
        return 0.5 * (phi**2 - np.exp(num2 - den))
    # K family: central finite differences on the analytic phi
    h = 1e-6 * np.maximum(t, 1e-3)
    return (_phi_raw(kernel, m, t + h) - _phi_raw(kernel, m, t - h)) / (2 * h)


def _q_moments_raw(kernel, m):
    """(E Q_raw, E Q_raw^2) at real dimension m; inf where divergent."""
    fam = kernel.family
    if fam == "gaussian":
        return m, m * (m + 2.0)
    if fam == "student":
        nu = kernel.nu
        e1 = m * nu / (nu - 2) if nu > 2 else np.inf
        e2 = m * (m + 2) * nu**2 / ((nu - 2) * (nu - 4)) if nu > 4 else np.inf
        return e1, e2
    if fam == "gg":
        s, b = kernel.s, kernel.b
        k = m / (2 * s)
        theta = 2**s * b
        e1 = theta ** (1 / s) * math.exp(special.gammaln(k + 1 / s) - special.gammaln(k))
        e2 = theta ** (2 / s) * math.exp(special.gammaln(k + 2 / s) - special.gammaln(k))
        return e1, e2
    if fam == "k":
        nu = kernel.nu
        et, et2 = 0.5, (nu + 1) / (4 * nu)
        return m * et, m * (m + 2) * et2
    if fam == "epscont":
        eps, a2 = kernel.eps, kernel.a2
        et = 1 - eps + eps * a2
        et2 = 1 - eps + eps * a2**2
        return m * et, m * (m + 2) * et2
    raise AssertionError(fam)


# ---------------------------------------------------------------------------
# effective-scale and complex wrappers
# ---------------------------------------------------------------------------


def log_density_generator(kernel, t):
    """log g(t) in the kernel's own convention (complex kernels return log g_c)."""
    z = kernel.q_scale
    mr = kernel.real_dim
    t = np.asarray(t, dtype=float)
    if kernel.is_complex:
        return kernel.dim * np.log(2.0) + (mr / 2) * np.log(z) + _log_g_raw(
            kernel, mr, 2 * z * t
        )
    return (mr / 2) * np.log(z) + _log_g_raw(kernel, mr, z * t)


def density_generator(kernel, t):
    """Density generator g(t); positive wherever defined."""
    return np.exp(log_density_generator(kernel, t))


def score_phi(kernel, t):
    """phi(t) = -2 g'(t)/g(t) of the kernel's generator.

    For complex kernels this is the score of g_c; the Fisher-coefficient
    definitions use g_c'/g_c without the factor 2, i.e. score_phi / 2.
    """
    z = kernel.q_scale
    mr = kernel.real_dim
    t = np.asarray(t, dtype=float)
    if kernel.is_complex:
        return 2.0 * z * _phi_raw(kernel, mr, 2 * z * t)
    return z * _phi_raw(kernel, mr, z * t)


def score_phi_deriv(kernel, t):
    """Derivative of :func:`score_phi` (real kernels only)."""
    if kernel.is_complex:
        raise ValueError("score_phi_deriv is defined for real kernels")
    z = kernel.q_scale
    t = np.asarray(t, dtype=float)
    return z**2 * _phi_deriv_raw(kernel, kernel.real_dim, z * t)


def _interpolated_cdf(pdf, scale_hint, knots=2000, tail_tol=1e-13):
    """Monotone-interpolated cdf of a density without a closed distribution.

    Panel quadrature of the (analytically normalized) pdf on a log-spaced
    grid, evaluated through a monotone cubic; built lazily on first call.
    """
    state = {}

    def build():
        hi = max(10.0 * scale_hint, 1.0)
        while integrate.quad(pdf, hi, np.inf, limit=200)[0] > tail_tol:
            hi *= 2.0
        grid = np.concatenate([[0.0], np.geomspace(hi * 1e-9, hi, knots)])
        increments = [0.0]
        for a, b in zip(grid[:-1], grid[1:]):
            val, _ = integrate.quad(pdf, a, b, epsabs=1e-14, epsrel=1e-11, limit=200)
            increments.append(max(val, 0.0))
        cum = np.minimum(np.cumsum(increments), 1.0)
        from scipy.interpolate import PchipInterpolator

        state["hi"] = hi
        state["interp"] = PchipInterpolator(grid, cum, extrapolate=False)

    def cdf(q):
        if "interp" not in state:
            build()
        q = np.asarray(q, dtype=float)
        out = np.where(
            q <= 0.0,
            0.0,
            np.where(q >= state["hi"], 1.0, state["interp"](np.clip(q, 0.0, state["hi"]))),
        )
        return out if out.ndim else float(out)

    return cdf


def _scale_qlaw(law, c, description=None):
    """Law of c * Q for a positive constant c."""
    return QLaw(
        dim=law.dim,
        description=description or f"{law.description} scaled by {c:g}",
        pdf=lambda q, law=law, c=c: law.pdf(np.asarray(q) / c) / c,
        logpdf=lambda q, law=law, c=c: law.logpdf(np.asarray(q) / c) - np.log(c),
        cdf=lambda q, law=law, c=c: law.cdf(np.asarray(q) / c),
        sample=lambda rng, size, law=law, c=c: c * law.sample(rng, size),
        mean=law.mean * c,
        second_moment=law.second_moment * c**2,
    )


def _q_law_raw(kernel, m):
    """Q law of the raw real m-dimensional member."""
    fam = kernel.family
    if fam == "gaussian":
        frozen = stats.chi2(m)
        return QLaw(
            dim=m,
            description=f"chi2({m})",
            pdf=frozen.pdf,
            logpdf=frozen.logpdf,
            cdf=frozen.cdf,
            sample=lambda rng, size, m=m: rng.chisquare(m, size),
            mean=float(m),
            second_moment=float(m * (m + 2)),
        )
    if fam == "student":
        nu = kernel.nu
        frozen = stats.f(m, nu, scale=m)
        e1, e2 = _q_moments_raw(kernel, m)
        return QLaw(
            dim=m,
            description=f"{m} * F({m},{nu:g})",
            pdf=frozen.pdf,
            logpdf=frozen.logpdf,
            cdf=frozen.cdf,
            sample=lambda rng, size, m=m, nu=nu: nu
            * rng.chisquare(m, size)
            / rng.chisquare(nu, size),
            mean=e1,
            second_moment=e2,
        )
    if fam == "gg":
        s, b = kernel.s, kernel.b
        k = m / (2 * s)
        theta = 2**s * b
        frozen = stats.gengamma(k, s, scale=theta ** (1 / s))
        e1, e2 = _q_moments_raw(kernel, m)
        return QLaw(
            dim=m,
            description=f"Gam({k:g},{theta:g})^(1/{s:g})",
            pdf=frozen.pdf,
            logpdf=frozen.logpdf,
            cdf=frozen.cdf,
            sample=lambda rng, size, k=k, theta=theta, s=s: rng.gamma(
                k, theta, size
            )
            ** (1 / s),
            mean=e1,
            second_moment=e2,
        )
    if fam == "k":
        nu = kernel.nu
        theta = 1.0 / (2 * nu)  # raw texture Gam(nu, theta), mean 1/2
        dm = delta_norm(m)

        def pdf(q, kern=kernel, m=m, dm=dm):
            q = np.asarray(q, dtype=float)
            with np.errstate(divide="ignore"):
                val = np.where(
                    q > 0,
                    np.exp(
                        (m / 2 - 1) * np.log(np.maximum(q, 1e-300))
                        + _log_g_raw(kern, m, q)
                    )
                    / dm,
                    0.0 if m >= 2 else np.inf,
                )
            return val

        e1, e2 = _q_moments_raw(kernel, m)
        cdf = _interpolated_cdf(pdf, scale_hint=e1)
        return QLaw(
            dim=m,
            description=f"K-dist Q (nu={nu:g})",
            pdf=pdf,
            logpdf=lambda q: np.log(pdf(q)),
            cdf=cdf,
            sample=lambda rng, size, nu=nu, theta=theta, m=m: rng.gamma(
                nu, theta, size
            )
            * rng.chisquare(m, size),
            mean=e1,
            second_moment=e2,
        )
    if fam == "epscont":
        eps, a2 = kernel.eps, kernel.a2
        heavy = stats.gamma(m / 2, scale=2 * a2)
        base = stats.gamma(m / 2, scale=2.0)
        e1, e2 = _q_moments_raw(kernel, m)
        return QLaw(
            dim=m,
            description=f"eps-contaminated Q (eps={eps:g}, a2={a2:g})",
            pdf=lambda q: eps * heavy.pdf(q) + (1 - eps) * base.pdf(q),
            logpdf=lambda q: np.logaddexp(
                np.log(eps) + heavy.logpdf(q), np.log1p(-eps) + base.logpdf(q)
            ),
            cdf=lambda q: eps * heavy.cdf(q) + (1 - eps) * base.cdf(q),
            sample=lambda rng, size, eps=eps, a2=a2, m=m: np.where(
                rng.random(size) < eps, a2, 1.0
            )
            * rng.chisquare(m, size),
            mean=e1,
            second_moment=e2,
        )
    raise AssertionError(fam)


def q_law(kernel):
    """Law of the kernel's second-order modular variate.

    Real kernels: law of Q_raw / zeta.  Complex kernels: law of half the
    2m-dimensional real Q.
    """
    law = _q_law_raw(kernel, kernel.real_dim)
    c = 1.0 / kernel.q_scale
    if kernel.is_complex:
        c = c / 2.0
    if c == 1.0:
        return law
    return _scale_qlaw(law, c, description=f"{law.description} (scale {c:g})")


def texture_law(kernel):
    """Texture law of a compound-Gaussian kernel, or None.

    The generalized Gaussian is not compound Gaussian (its normal-mixture
    representation for s < 1 has a dimension-dependent mixing law), so it
    returns None.  Complex compound-Gaussian kernels use the same texture
    paired with a speckle of covariance Sigma.
    """
    z = kernel.q_scale
    fam = kernel.family
    if fam == "gg":
        return None
    if fam == "gaussian":
        v = 1.0 / z
        return TextureLaw(
            description="degenerate tau = 1",
            mean=v,
            var=0.0,
            sample=lambda rng, size, v=v: np.full(size, v),
            cdf=lambda t, v=v: (np.asarray(t, dtype=float) >= v).astype(float),
            atoms=((v, 1.0),),
        )
    if fam == "student":
        nu = kernel.nu
        frozen = stats.invgamma(nu / 2, scale=nu / (2 * z))
        mean = nu / (z * (nu - 2)) if nu > 2 else np.inf
        var = (
            2 * nu**2 / (z**2 * (nu - 2) ** 2 * (nu - 4)) if nu > 4 else np.inf
        )
        return TextureLaw(
            description=f"inverse-gamma texture (nu={nu:g}, scale 1/{z:g})",
            mean=mean,
            var=var,
            sample=lambda rng, size, nu=nu, z=z: 1.0
            / (z * rng.gamma(nu / 2, 2.0 / nu, size)),
            cdf=frozen.cdf,
            pdf=frozen.pdf,
        )
    if fam == "k":
        nu = kernel.nu
        theta = 1.0 / (2 * nu * z)
        frozen = stats.gamma(nu, scale=theta)
        return TextureLaw(
            description=f"gamma texture Gam({nu:g}, {theta:g})",
            mean=nu * theta,
            var=nu * theta**2,
            sample=lambda rng, size, nu=nu, theta=theta: rng.gamma(nu, theta, size),
            cdf=frozen.cdf,
            pdf=frozen.pdf,
        )
    if fam == "epscont":
        eps, a2 = kernel.eps, kernel.a2
        atoms = ((a2 / z, eps), (1.0 / z, 1 - eps))
        mean = eps * a2 / z + (1 - eps) / z
        second = eps * (a2 / z) ** 2 + (1 - eps) / z**2
        return TextureLaw(
            description=f"two-point texture (eps={eps:g}, a2={a2:g})",
            mean=mean,
            var=second - mean**2,
            sample=lambda rng, size, eps=eps, a2=a2, z=z: np.where(
                rng.random(size) < eps, a2 / z, 1.0 / z
            ),
            cdf=lambda t, atoms=atoms: sum(
                p * (np.asarray(t, dtype=float) >= v) for v, p in atoms
            ),
            atoms=atoms,
        )
    raise AssertionError(fam)


def kurtosis(kernel):
    """Elliptical kurtosis parameter of the marginals; inf when divergent.

    Complex kernels report the kurtosis of the 2m-dimensional real
    representation.  The value is scale-free.
    """
    fam = kernel.family
    mr = kernel.real_dim
    if fam == "gaussian":
        return 0.0
    if fam == "student":
        nu = kernel.nu
        return 2.0 / (nu - 4) if nu > 4 else np.inf
    if fam == "k":
        return 1.0 / kernel.nu
    if fam == "epscont":
        tex = texture_law(kernel)
        return tex.var / tex.mean**2
    if fam == "gg":
        s = kernel.s
        k = mr / (2 * s)
        ratio = math.exp(
            special.gammaln(k) + special.gammaln(k + 2 / s) - 2 * special.gammaln(k + 1 / s)
        )
        return mr / (mr + 2) * ratio - 1.0
    raise AssertionError(fam)


# ---------------------------------------------------------------------------
# Fisher xi coefficients
# ---------------------------------------------------------------------------


def _xi_closed_real(kernel, m):
    """Closed-form (xi1_raw, xi2) at real dimension m, or None."""
    fam = kernel.family
    if fam == "gaussian":
        return 1.0, 1.0
    if fam == "student":
        nu = kernel.nu
        v = (nu + m) / (nu + m + 2)
        return v, v
    if fam == "gg":
        s, b = kernel.s, kernel.b
        k = m / (2 * s)
        if k + 2 - 1 / s <= 0:
            raise ValueError("xi1 integral divergent for this (m, s)")
        theta = 2**s * b
        xi1 = (
            4
            * s**2
            * theta ** (-1 / s)
            * math.exp(special.gammaln(k + 2 - 1 / s) - special.gammaln(k))
            / m
        )
        xi2 = (m + 2 * s) / (m + 2)
        return xi1, xi2
    return None


def sb_xi(kernel, method="auto", epsrel=QUAD_EPSREL):
    """Fisher coefficients (xi1, xi2) in the kernel's realness convention.

    Real kernels:    xi1 = E[Q phi^2(Q)]/m,        xi2 = E[Q^2 phi^2(Q)]/(m(m+2)).
    Complex kernels: xi1 = E[Q phi_c^2(Q)]/m,      xi2 = E[Q^2 phi_c^2(Q)]/(m(m+1)),
    where phi_c = -g_c'/g_c (half of :func:`score_phi`) and Q is the complex
    modular variate.  xi2 is free of the scale convention; xi1 is not.

    ``method`` is "auto" (closed form when known, else quadrature), "closed"
    or "quad".
    """
    z = kernel.q_scale
    if method in ("auto", "closed"):
        closed = _xi_closed_real(kernel, kernel.real_dim)
        if closed is not None:
            xi1_raw, xi2 = closed
            return z * xi1_raw, xi2
        if method == "closed":
            raise ValueError(f"no closed-form xi for family {kernel.family!r}")

    law = q_law(kernel)
    m = kernel.dim
    if kernel.is_complex:
        phi = lambda q: 0.5 * score_phi(kernel, q)
        denom2 = m * (m + 1.0)
    else:
        phi = lambda q: score_phi(kernel, q)
        denom2 = m * (m + 2.0)
    xi1 = law.expect(lambda q: q * phi(q) ** 2, epsrel=epsrel) / m
    xi2 = law.expect(lambda q: q**2 * phi(q) ** 2, epsrel=epsrel) / denom2
    return xi1, xi2


# ---------------------------------------------------------------------------
# scale conventions and constructors
# ---------------------------------------------------------------------------


def rescale_kernel(kernel, c2):
    """Kernel equivalent to the input under Sigma -> c2 * Sigma.

    (c2 Sigma, rescaled kernel) and (Sigma, kernel) describe the same law.
    """
    if c2 <= 0:
        raise ValueError("c2 must be positive")
    return replace(kernel, q_scale=kernel.q_scale * c2, scale="raw")


def scale_normalize(kernel, rule=None):
    """Re-anchor the kernel's scale convention; idempotent.

    rule "cov" fixes E(Q) = m (so cov(x) = Sigma); when E(Q_raw) is infinite
    it falls back to "median", which fixes Median(Q) = 1.  rule "raw"
    restores the textbook parameterization.
    """
    raw = replace(kernel, q_scale=1.0, scale="raw")
    if rule == "raw":
        return raw
    e1, _ = _q_moments_raw(raw, raw.real_dim)
    if rule is None:
        rule = "cov" if np.isfinite(e1) else "median"
    if rule == "cov":
        if not np.isfinite(e1):
            rule = "median"
        else:
            return replace(raw, q_scale=e1 / raw.real_dim, scale="cov")
    if rule == "median":
        zeta = _q_law_raw(raw, raw.real_dim).median()
        return replace(raw, q_scale=zeta, scale="median")
    raise ValueError(f"unknown scale rule {rule!r}")


def _gg_cov_b(m, s):
    """Scale b making cov(x) = Sigma for the real m-dimensional GG family."""
    return (
        m
        / 2
        * math.exp(special.gammaln(m / (2 * s)) - special.gammaln((m / 2 + 1) / s))
    ) ** s


def gaussian(m, realness=REAL, scale="cov"):
    k = FamilyKernel("gaussian", m, realness=realness)
    return scale_normalize(k, rule=scale)


def student(m, nu, realness=REAL, scale="cov"):
    k = FamilyKernel("student", m, realness=realness, nu=float(nu))
    return scale_normalize(k, rule=scale)


def gg(m, s, b="cov", realness=REAL, scale="cov"):
    is_complex = realness != REAL
    mr = 2 * m if is_complex else m
    bval = _gg_cov_b(mr, float(s)) if isinstance(b, str) and b == "cov" else float(b)
    k = FamilyKernel("gg", m, realness=realness, s=float(s), b=bval)
    return scale_normalize(k, rule=scale)


def kdist(m, nu, realness=REAL, scale="cov"):
    k = FamilyKernel("k", m, realness=realness, nu=float(nu))
    return scale_normalize(k, rule=scale)


def epscont(m, eps, a2, realness=REAL, scale="cov"):
    k = FamilyKernel("epscont", m, realness=realness, eps=float(eps), a2=float(a2))
    return scale_normalize(k, rule=scale)


def make_kernel(family, m, realness=REAL, scale="cov", **params):
    ctor = {
        "gaussian": gaussian,
        "student": student,
        "gg": gg,
        "k": kdist,
        "epscont": epscont,
    }[family]
    return ctor(m, realness=realness, scale=scale, **params)


_FAMILY_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*(.*?)\s*\))?\s*$")


def parse_family(text, m, realness=REAL, scale="cov"):
    """Parse a family specification string into a kernel.

    Grammar: ``gaussian | student(nu=..) | gg(s=.., b=..|b=cov) | k(nu=..)
    | epscont(eps=.., a2=..)``.
    """
    match = _FAMILY_RE.match(text.lower())
    if not match:
        raise ValueError(f"cannot parse family spec {text!r}")
    name, argstr = match.group(1), match.group(2)
    kwargs = {}
    if argstr:
        for item in argstr.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            val = val.strip()
            if not key or not val:
                raise ValueError(f"bad family argument {item!r} in {text!r}")
            kwargs[key] = val if val == "cov" else float(val)
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}")
    return make_kernel(name, m, realness=realness, scale=scale, **kwargs)
