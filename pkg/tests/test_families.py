import numpy as np
import pytest
from scipy import integrate, special, stats

from ellipsym import families as F

ALL_FAMILY_SPECS = [
    "gaussian",
    "student(nu=5)",
    "gg(s=0.5)",
    "gg(s=2)",
    "k(nu=1.5)",
    "epscont(eps=0.1, a2=9)",
]


def kernels_for(m, scale="cov"):
    return [F.parse_family(text, m, scale=scale) for text in ALL_FAMILY_SPECS]


# ---------------------------------------------------------------------------
# density generator
# ---------------------------------------------------------------------------


def test_gaussian_generator_values():
    k2 = F.gaussian(2)
    assert np.isclose(F.density_generator(k2, 0.0), 1 / (2 * np.pi))
    k1 = F.gaussian(1)
    assert np.isclose(F.density_generator(k1, 1.0), np.exp(-0.5) / np.sqrt(2 * np.pi))


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("text", ALL_FAMILY_SPECS)
def test_generator_normalization(text, m):
    kernel = F.parse_family(text, m)
    dm = F.delta_norm(m)

    def integrand(t):
        return t ** (m / 2 - 1) * F.density_generator(kernel, t)

    val, _ = integrate.quad(integrand, 0, np.inf, limit=300)
    assert abs(val - dm) / dm < 1e-6


@pytest.mark.parametrize("m", [1, 3])
@pytest.mark.parametrize("text", ["gaussian", "student(nu=4)", "k(nu=2)"])
def test_complex_generator_normalization(text, m):
    kernel = F.parse_family(text, m, realness=F.CIRCULAR)
    target = np.exp(special.gammaln(m) - m * np.log(np.pi))

    def integrand(t):
        return t ** (m - 1) * F.density_generator(kernel, t)

    val, _ = integrate.quad(integrand, 0, np.inf, limit=300)
    assert abs(val - target) / target < 1e-6


def test_k_generator_matches_texture_mixture():
    # cross-check the Bessel form against the scale-mixture integral
    kernel = F.kdist(2, 1.0, scale="raw")
    tex = F.texture_law(kernel)
    m = 2
    for t in (0.25, 1.0, 4.0, 9.0):
        mix, _ = integrate.quad(
            lambda tau: (2 * np.pi) ** (-m / 2)
            * tau ** (-m / 2)
            * np.exp(-t / (2 * tau))
            * tex.pdf(tau),
            0,
            np.inf,
            limit=300,
        )
        assert abs(mix - F.density_generator(kernel, t)) / mix < 1e-6


def test_student_generator_matches_texture_mixture():
    kernel = F.student(3, 5.0, scale="raw")
    tex = F.texture_law(kernel)
    m = 3
    for t in (0.5, 2.0, 7.0):
        mix, _ = integrate.quad(
            lambda tau: (2 * np.pi) ** (-m / 2)
            * tau ** (-m / 2)
            * np.exp(-t / (2 * tau))
            * tex.pdf(tau),
            0,
            np.inf,
            limit=300,
        )
        assert abs(mix - F.density_generator(kernel, t)) / mix < 1e-6


# ---------------------------------------------------------------------------
# score function
# ---------------------------------------------------------------------------


def test_score_phi_gaussian_is_one():
    k = F.gaussian(4)
    t = np.logspace(-3, 3, 20)
    assert np.allclose(F.score_phi(k, t), 1.0)


def test_score_phi_student_closed_form():
    m, nu = 3, 4.0
    k = F.student(m, nu, scale="raw")
    t = np.logspace(-2, 2, 15)
    assert np.allclose(F.score_phi(k, t), (nu + m) / (nu + t), rtol=1e-12)


def test_score_phi_gg_s1_collapses_to_gaussian():
    k = F.gg(3, 1.0)
    t = np.logspace(-2, 2, 15)
    assert np.allclose(F.score_phi(k, t), 1.0, rtol=1e-12)


@pytest.mark.parametrize("text", ALL_FAMILY_SPECS)
def test_score_phi_matches_log_derivative(text):
    kernel = F.parse_family(text, 3)
    for t in np.logspace(-2, 2, 12):
        h = 1e-6 * max(t, 1e-3)
        fd = -2 * (
            F.log_density_generator(kernel, t + h)
            - F.log_density_generator(kernel, t - h)
        ) / (2 * h)
        assert abs(F.score_phi(kernel, t) - fd) < 1e-6 * max(
            1.0, abs(F.score_phi(kernel, t))
        )


@pytest.mark.parametrize("text", ["gaussian", "student(nu=6)", "gg(s=2)", "gg(s=0.7)", "epscont(eps=0.2, a2=4)"])
def test_score_phi_deriv_matches_fd(text):
    kernel = F.parse_family(text, 2)
    for t in np.logspace(-1, 1.5, 8):
        h = 1e-5 * max(t, 1e-2)
        fd = (F.score_phi(kernel, t + h) - F.score_phi(kernel, t - h)) / (2 * h)
        assert np.isclose(F.score_phi_deriv(kernel, t), fd, rtol=5e-5, atol=1e-10)


# ---------------------------------------------------------------------------
# Q laws
# ---------------------------------------------------------------------------


def test_q_law_gaussian_is_chisq():
    law = F.q_law(F.gaussian(3))
    ref = stats.chi2(3)
    q = np.linspace(0.1, 12, 30)
    assert np.allclose(law.pdf(q), ref.pdf(q), rtol=1e-12)
    assert np.allclose(law.cdf(q), ref.cdf(q), rtol=1e-12)
    assert law.mean == 3


def test_q_law_student_scaled_f():
    m, nu = 2, 5.0
    law = F.q_law(F.student(m, nu, scale="raw"))
    ref = stats.f(m, nu)
    q = np.linspace(0.1, 30, 25)
    assert np.allclose(law.cdf(q), ref.cdf(q / m), rtol=1e-12)


def test_q_law_gg_power_gamma():
    m, s = 2, 0.5
    kernel = F.gg(m, s)
    law = F.q_law(kernel)
    ref = stats.gamma(m / (2 * s), scale=2**s * kernel.b)
    q = np.linspace(0.05, 40, 25)
    assert np.allclose(law.cdf(q), ref.cdf(q**s), rtol=1e-10)


@pytest.mark.parametrize("text", ALL_FAMILY_SPECS)
def test_q_law_pdf_normalized_and_matches_cdf(text):
    kernel = F.parse_family(text, 3)
    law = F.q_law(kernel)
    total, _ = integrate.quad(law.pdf, 0, np.inf, limit=300)
    assert abs(total - 1) < 1e-8
    # cdf consistency at a few points
    for q in (0.5, 2.0, 6.0):
        part, _ = integrate.quad(law.pdf, 0, q, limit=300)
        assert abs(part - law.cdf(q)) < 1e-7


@pytest.mark.parametrize("text", ALL_FAMILY_SPECS)
def test_q_law_moments_match_quadrature(text):
    kernel = F.parse_family(text, 2)
    law = F.q_law(kernel)
    assert abs(law.expect(lambda q: q) - law.mean) < 1e-6 * law.mean
    if np.isfinite(law.second_moment):
        m2 = law.expect(lambda q: q**2)
        assert abs(m2 - law.second_moment) / law.second_moment < 1e-6


def test_q_law_median_matches_scipy_ppf():
    law = F.q_law(F.student(2, 5.0, scale="raw"))
    assert abs(law.median() - 2 * stats.f(2, 5).ppf(0.5)) < 1e-8


# ---------------------------------------------------------------------------
# kurtosis
# ---------------------------------------------------------------------------


def test_kurtosis_values():
    assert F.kurtosis(F.gaussian(3)) == 0.0
    assert np.isclose(F.kurtosis(F.student(2, 10.0)), 1 / 3)
    assert np.isclose(F.kurtosis(F.kdist(2, 4.0)), 0.25)
    assert np.isclose(F.kurtosis(F.gg(1, 1.0)), 0.0)
    assert F.kurtosis(F.student(2, 3.0)) == np.inf


def test_gg_kurtosis_m1_closed_form():
    for s in (0.5, 1.0, 2.0):
        expected = np.exp(
            special.gammaln(5 / (2 * s))
            + special.gammaln(1 / (2 * s))
            - 2 * special.gammaln(3 / (2 * s))
        ) / 3 - 1
        assert np.isclose(F.kurtosis(F.gg(1, s)), expected, rtol=1e-12)


def test_epscont_kurtosis_two_point():
    eps, a2 = 0.1, 9.0
    et = 1 - eps + eps * a2
    et2 = 1 - eps + eps * a2**2
    assert np.isclose(F.kurtosis(F.epscont(2, eps, a2)), (et2 - et**2) / et**2)


@pytest.mark.parametrize("m", [1, 2, 5])
@pytest.mark.parametrize("text", ALL_FAMILY_SPECS)
def test_kurtosis_lower_bound(text, m):
    kernel = F.parse_family(text, m)
    assert F.kurtosis(kernel) >= -2 / (m + 2)


# ---------------------------------------------------------------------------
# texture laws
# ---------------------------------------------------------------------------


def test_texture_gaussian_degenerate():
    tex = F.texture_law(F.gaussian(3))
    assert tex.is_degenerate
    assert tex.mean == 1.0 and tex.var == 0.0


def test_texture_k_raw_matches_printed_density():
    nu = 2.0
    tex = F.texture_law(F.kdist(2, nu, scale="raw"))
    assert np.isclose(tex.mean, 0.5)
    for tau in (0.1, 0.4, 1.1):
        expected = 2 * nu**nu / special.gamma(nu) * (2 * tau) ** (nu - 1) * np.exp(
            -2 * nu * tau
        )
        assert np.isclose(tex.pdf(tau), expected, rtol=1e-12)


def test_texture_k_cov_rescaled_to_unit_mean():
    tex = F.texture_law(F.kdist(2, 2.0, scale="cov"))
    assert np.isclose(tex.mean, 1.0)


def test_texture_epscont_mean():
    tex = F.texture_law(F.epscont(2, 0.1, 9.0, scale="raw"))
    assert np.isclose(tex.mean, 0.1 * 9 + 0.9)


def test_texture_student_raw_mean():
    nu = 5.0
    tex = F.texture_law(F.student(2, nu, scale="raw"))
    assert np.isclose(tex.mean, nu / (nu - 2))


def test_texture_absent_for_gg():
    assert F.texture_law(F.gg(2, 2.0)) is None


# ---------------------------------------------------------------------------
# xi coefficients
# ---------------------------------------------------------------------------


def test_xi_gaussian_real():
    xi1, xi2 = F.sb_xi(F.gaussian(3))
    assert np.isclose(xi1, 1.0) and np.isclose(xi2, 1.0)


def test_xi_complex_student_example():
    xi1, xi2 = F.sb_xi(F.student(2, 6.0, realness=F.CIRCULAR))
    assert np.isclose(xi2, 5 / 6, rtol=1e-12)


def test_xi_complex_gg_example():
    xi1, xi2 = F.sb_xi(F.gg(3, 2.0, realness=F.CIRCULAR))
    assert np.isclose(xi2, 1.25, rtol=1e-12)


@pytest.mark.parametrize(
    "kernel",
    [
        F.student(2, 6.0),
        F.student(4, 4.5),
        F.gg(3, 2.0),
        F.gg(2, 0.6),
    ],
)
def test_xi_quadrature_matches_closed(kernel):
    c1, c2 = F.sb_xi(kernel, method="closed")
    q1, q2 = F.sb_xi(kernel, method="quad")
    assert abs(q1 - c1) / c1 < 1e-6
    assert abs(q2 - c2) / c2 < 1e-6


def test_xi_scale_behavior():
    raw = F.student(2, 6.0, scale="raw")
    cov = F.student(2, 6.0, scale="cov")
    r1, r2 = F.sb_xi(raw)
    c1, c2 = F.sb_xi(cov)
    assert np.isclose(r2, c2)  # xi2 free of the scale convention
    assert not np.isclose(r1, c1)  # xi1 is not
    assert np.isclose(c1, raw.nu / (raw.nu - 2) * r1)


def test_xi_divergent_raises():
    with pytest.raises(ValueError):
        F.sb_xi(F.gg(1, 0.2))  # location information diverges for small s at m=1


# ---------------------------------------------------------------------------
# scale conventions
# ---------------------------------------------------------------------------


def test_scale_normalize_gaussian_unchanged():
    k = F.scale_normalize(F.gaussian(3), rule="cov")
    assert k.q_scale == 1.0


def test_scale_normalize_student_factor():
    k = F.student(2, 5.0)
    assert np.isclose(k.q_scale, 5.0 / 3.0)
    assert np.isclose(F.q_law(k).mean, 2.0)


def test_scale_normalize_idempotent():
    k = F.student(3, 6.0)
    again = F.scale_normalize(k, rule="cov")
    assert np.isclose(again.q_scale, k.q_scale)
    assert again.scale == "cov"


def test_scale_normalize_cauchy_median_rule():
    k = F.student(2, 1.0, scale="cov")  # falls back to the median rule
    assert k.scale == "median"
    assert abs(F.q_law(k).median() - 1.0) < 1e-8


def test_median_scale_for_all_families():
    for text in ALL_FAMILY_SPECS:
        k = F.parse_family(text, 2, scale="median")
        assert abs(F.q_law(k).median() - 1.0) < 1e-7


def test_gg_cov_b_value():
    m, s = 2, 0.5
    kernel = F.gg(m, s)
    expected = (m / 2 * special.gamma(m / (2 * s)) / special.gamma((m / 2 + 1) / s)) ** s
    assert np.isclose(kernel.b, expected)
    assert np.isclose(F.q_law(kernel).mean, m)


def test_rescale_kernel_is_consistent_with_q_law():
    k = F.student(2, 5.0)
    k2 = F.rescale_kernel(k, 4.0)
    assert np.isclose(F.q_law(k2).mean, F.q_law(k).mean / 4.0)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_family_grammar():
    k = F.parse_family("student(nu=3)", 2)
    assert k.family == "student" and k.nu == 3.0
    k = F.parse_family("gg(s=2, b=cov)", 3)
    assert k.family == "gg"
    k = F.parse_family("epscont(eps=0.05, a2=16)", 2, scale="raw")
    assert k.eps == 0.05 and k.scale == "raw"
    with pytest.raises(ValueError):
        F.parse_family("weibull(k=2)", 2)
    with pytest.raises(ValueError):
        F.parse_family("student(nu=-1)", 2)


def test_kernel_validation():
    with pytest.raises(ValueError):
        F.FamilyKernel("epscont", 2, eps=1.5, a2=1.0)
    with pytest.raises(ValueError):
        F.FamilyKernel("gg", 2, s=-1.0, b=1.0)
    with pytest.raises(ValueError):
        F.FamilyKernel("gaussian", 0)
