import numpy as np
import pytest
from scipy import integrate, special, stats

from ellipsym import density as D
from ellipsym import families as F
from ellipsym import sampling as S
from ellipsym.matrixkit import schur_conditional

SIGMA2 = np.array([[2.0, 0.5], [0.5, 1.0]])


def spec_of(kernel, sigma=None, mu=None):
    m = kernel.dim
    dtype = complex if kernel.is_complex else float
    sigma = np.eye(m, dtype=dtype) if sigma is None else np.asarray(sigma, dtype=dtype)
    mu = np.zeros(m, dtype=dtype) if mu is None else np.asarray(mu, dtype=dtype)
    return S.DistributionSpec(kernel, mu, sigma)


# ---------------------------------------------------------------------------
# real densities
# ---------------------------------------------------------------------------


def test_gaussian_pdf_value():
    spec = spec_of(F.gaussian(1))
    assert np.isclose(D.pdf_res(spec, np.zeros(1)).pdf, 1 / np.sqrt(2 * np.pi))


def test_student_pdf_at_center_raw():
    nu = 3.0
    spec = spec_of(F.student(2, nu, scale="raw"), sigma=SIGMA2)
    expected = special.gamma((nu + 2) / 2) / (
        (nu * np.pi) * special.gamma(nu / 2) * np.sqrt(np.linalg.det(SIGMA2))
    )
    assert np.isclose(D.pdf_res(spec, np.zeros(2)).pdf, expected, rtol=1e-12)


def test_scale_ambiguity_pointwise():
    rng = np.random.default_rng(0)
    for text in ("gaussian", "student(nu=4)", "gg(s=0.5)", "k(nu=2)", "epscont(eps=0.2, a2=4)"):
        kernel = F.parse_family(text, 2)
        spec = spec_of(kernel, sigma=SIGMA2)
        spec4 = spec_of(F.rescale_kernel(kernel, 4.0), sigma=4.0 * SIGMA2)
        for _ in range(50):
            x = rng.normal(0, 2, 2)
            l1 = D.pdf_res(spec, x).log_pdf
            l2 = D.pdf_res(spec4, x).log_pdf
            assert abs(l1 - l2) <= 1e-12 * max(1.0, abs(l1))


@pytest.mark.parametrize(
    "text", ["gaussian", "student(nu=5)", "gg(s=2)", "k(nu=2)", "epscont(eps=0.1, a2=9)"]
)
def test_pdf_integrates_to_one_m1(text):
    spec = spec_of(F.parse_family(text, 1))
    total, _ = integrate.quad(
        lambda x: D.pdf_res(spec, np.array([x])).pdf, -np.inf, np.inf, limit=400
    )
    assert abs(total - 1) < 1e-4


@pytest.mark.parametrize(
    "text", ["gaussian", "student(nu=5)", "gg(s=0.8)", "k(nu=2)", "epscont(eps=0.1, a2=9)"]
)
def test_pdf_integrates_to_one_m2(text):
    kernel = F.parse_family(text, 2)
    spec = spec_of(kernel, sigma=SIGMA2)
    law = F.q_law(kernel)
    # tensor-grid quadrature over a box holding all but ~1e-7 of the mass
    qhi = 2.0 * np.sort(law.sample(np.random.default_rng(0), 200_000))[-20]
    half = np.sqrt(qhi * np.linalg.eigvalsh(SIGMA2)[-1])
    nodes, weights = np.polynomial.legendre.leggauss(220)
    xs = half * nodes
    dens = np.array(
        [[D.pdf_res(spec, np.array([x, y])).pdf for y in xs] for x in xs]
    )
    total = half**2 * weights @ dens @ weights
    assert abs(total - 1) < 1e-4


def test_log_density_finite_at_huge_q():
    for text in ("gaussian", "student(nu=3)", "gg(s=2)", "k(nu=2)", "epscont(eps=0.1, a2=9)"):
        spec = spec_of(F.parse_family(text, 2))
        x = np.array([1e6, 0.0])  # Q = 1e12
        val = D.pdf_res(spec, x)
        assert np.isfinite(val.log_pdf)
        assert 0.0 <= val.pdf < 1e-20  # exp underflows gracefully, never overflows


# ---------------------------------------------------------------------------
# complex densities
# ---------------------------------------------------------------------------


def test_circular_gaussian_density_value():
    spec = spec_of(F.gaussian(1, realness=F.CIRCULAR))
    assert np.isclose(D.pdf_complex(spec, np.zeros(1, complex)).pdf, 1 / np.pi)


def test_circular_reduction_matches_explicit_form():
    m = 2
    rng = np.random.default_rng(1)
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    sigma = g @ g.conj().T + m * np.eye(m)
    kernel = F.student(m, 5.0, realness=F.CIRCULAR)
    spec = spec_of(kernel, sigma=sigma)
    sinv = np.linalg.inv(sigma)
    logdet = np.log(np.linalg.det(sigma).real)
    for _ in range(10):
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        q = np.real(x.conj() @ sinv @ x)
        direct = -logdet + F.log_density_generator(kernel, q)
        got = D.pdf_complex(spec, x).log_pdf
        assert abs(got - direct) < 1e-12 * max(1.0, abs(direct))


def test_noncircular_gaussian_matches_real_composite():
    kappa = 0.5
    kernel = F.gaussian(1, realness=F.NONCIRCULAR)
    spec = S.DistributionSpec(
        kernel,
        np.zeros(1, complex),
        np.eye(1, dtype=complex),
        omega=np.array([[kappa]], dtype=complex),
    )
    # real composite scatter of (Re x, Im x)
    sigma_bar = 0.5 * np.array([[1 + kappa, 0.0], [0.0, 1 - kappa]])
    ref = stats.multivariate_normal(mean=np.zeros(2), cov=sigma_bar)
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.standard_normal() + 1j * rng.standard_normal()
        got = D.pdf_complex(spec, np.array([x])).pdf
        want = ref.pdf([x.real, x.imag])
        assert np.isclose(got, want, rtol=1e-10)


def test_nc_student_matches_real_composite_vector():
    m = 2
    rng = np.random.default_rng(3)
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    sigma = g @ g.conj().T + m * np.eye(m)
    a = np.linalg.cholesky(sigma)
    omega = a @ np.diag([0.7, 0.2]) @ a.T
    kernel = F.student(m, 6.0, realness=F.NONCIRCULAR)
    spec = S.DistributionSpec(kernel, np.zeros(m, complex), sigma, omega=omega)
    bar = S.composite_real_spec(spec)
    for _ in range(10):
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        lhs = D.pdf_complex(spec, x).log_pdf
        rhs = D.pdf_res(bar, np.concatenate([x.real, x.imag])).log_pdf
        assert lhs == rhs  # defining identity, bitwise


# ---------------------------------------------------------------------------
# Q and R densities
# ---------------------------------------------------------------------------


def test_pdf_q_gaussian_m2_exponential():
    k = F.gaussian(2)
    q = np.linspace(0.1, 8, 12)
    assert np.allclose(D.pdf_q(k, q), 0.5 * np.exp(-q / 2), rtol=1e-12)


def test_pdf_r_gaussian_m1_half_normal():
    k = F.gaussian(1)
    r = np.linspace(0.05, 4, 12)
    assert np.allclose(D.pdf_r(k, r), np.sqrt(2 / np.pi) * np.exp(-(r**2) / 2), rtol=1e-12)


@pytest.mark.parametrize("text", ["gaussian", "student(nu=5)", "gg(s=2)", "k(nu=2)"])
def test_pdf_r_change_of_variable(text):
    kernel = F.parse_family(text, 3)
    r = np.linspace(0.2, 3.0, 20)
    assert np.allclose(D.pdf_r(kernel, r), 2 * r * D.pdf_q(kernel, r**2), rtol=1e-12)


# ---------------------------------------------------------------------------
# marginal generators
# ---------------------------------------------------------------------------


def test_marginal_generator_gaussian_closed_form():
    kernel = F.gaussian(4)
    for u in (0.1, 1.0, 4.0):
        want = np.exp(-u / 2) / (2 * np.pi)
        assert np.isclose(D.marginal_generator(kernel, 2, u), want, rtol=1e-10)
        assert np.isclose(D.marginal_generator(kernel, 2, u, method="quad"), want, rtol=1e-6)


def test_marginal_generator_student_matches_univariate():
    nu = 5.0
    kernel = F.student(3, nu, scale="raw")
    uni = F.student(1, nu, scale="raw")
    for u in (0.3, 1.5, 6.0):
        quadval = D.marginal_generator(kernel, 1, u, method="quad")
        closed = float(F.density_generator(uni, u))
        assert abs(quadval - closed) / closed < 1e-6


def test_gg_marginal_is_not_power_exponential():
    s, m = 2.0, 3
    kernel = F.gg(m, s)  # cov scale: marginal variance 1
    b1 = (0.5 * special.gamma(1 / (2 * s)) / special.gamma(3 / (2 * s))) ** s
    pe_const = s / (np.sqrt(np.pi) * b1 ** (1 / (2 * s)) * special.gamma(1 / (2 * s)))

    def power_exp_pdf(x):
        return pe_const * np.exp(-(x ** (2 * s)) / (2 * b1))

    devs = []
    for x in (0.3, 0.8, 1.5, 2.2):
        marg = D.marginal_generator(kernel, 1, x**2)
        devs.append(abs(marg - power_exp_pdf(x)) / power_exp_pdf(x))
    assert max(devs) > 0.01  # the marginal leaves the power-exponential family


# ---------------------------------------------------------------------------
# conditionals
# ---------------------------------------------------------------------------


def test_conditional_params_identity():
    spec = spec_of(F.gaussian(3))
    mu_c, sig_c = D.conditional_params(spec, 1, np.array([2.0]))
    assert np.allclose(mu_c, np.zeros(2))
    assert np.allclose(sig_c, np.eye(2))


def test_conditional_params_hand_case():
    spec = spec_of(F.gaussian(2), sigma=np.array([[2.0, 1.0], [1.0, 2.0]]))
    mu_c, sig_c = D.conditional_params(spec, 1, np.array([2.0]))
    assert np.allclose(mu_c, [1.0])
    assert np.allclose(sig_c, [[1.5]])


def test_conditional_scatter_is_schur_complement_bitwise():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 4))
    sigma = a @ a.T + 4 * np.eye(4)
    spec = spec_of(F.student(4, 5.0), sigma=sigma)
    _, sig_c = D.conditional_params(spec, 2, np.array([0.3, -0.2]))
    assert np.array_equal(sig_c, schur_conditional(sigma, 2)[4])


def test_conditional_pdf_gaussian_exact():
    sigma = np.array([[2.0, 0.8], [0.8, 1.5]])
    spec = spec_of(F.gaussian(2), sigma=sigma)
    x1 = np.array([1.2])
    mu_c, sig_c = D.conditional_params(spec, 1, x1)
    ref = stats.norm(loc=mu_c[0], scale=np.sqrt(sig_c[0, 0]))
    for x2 in (-1.0, 0.3, 2.0):
        got = D.conditional_pdf(spec, 1, x1, np.array([x2])).pdf
        assert np.isclose(got, ref.pdf(x2), rtol=1e-10)


def test_conditional_pdf_student_normalizes():
    spec = spec_of(F.student(2, 4.0), sigma=SIGMA2)
    x1 = np.array([0.7])
    total, _ = integrate.quad(
        lambda y: D.conditional_pdf(spec, 1, x1, np.array([y])).pdf,
        -np.inf,
        np.inf,
        limit=300,
    )
    assert abs(total - 1) < 1e-8


def test_conditional_covariance_gaussian_is_schur():
    sigma = np.array([[2.0, 0.8], [0.8, 1.5]])
    spec = spec_of(F.gaussian(2), sigma=sigma)
    got = D.conditional_covariance(spec, 1, np.array([1.2]))
    assert np.allclose(got, schur_conditional(sigma, 1)[4], rtol=1e-10)


def test_conditional_covariance_student_closed_form():
    # inverse-gamma texture posterior: E[tau | x1] = (nu + d1) / (nu + m1 - 2)
    nu, m1 = 6.0, 1
    kernel = F.student(2, nu, scale="raw")
    sigma = SIGMA2
    spec = spec_of(kernel, sigma=sigma)
    x1 = np.array([1.5])
    d1 = x1[0] ** 2 / sigma[0, 0]
    want = (nu + d1) / (nu + m1 - 2) * schur_conditional(sigma, 1)[4]
    got = D.conditional_covariance(spec, 1, x1)
    assert np.allclose(got, want, rtol=1e-8)


def test_conditional_covariance_rejects_gg():
    spec = spec_of(F.gg(2, 2.0), sigma=SIGMA2)
    with pytest.raises(ValueError):
        D.conditional_covariance(spec, 1, np.array([0.5]))


def test_conditional_regression_slope_monte_carlo():
    spec = spec_of(F.gaussian(2), sigma=SIGMA2)
    x = S.sample_res(spec, 100_000, seed=9).data
    slope = np.cov(x[:, 0], x[:, 1])[0, 1] / np.var(x[:, 0], ddof=1)
    assert abs(slope - SIGMA2[1, 0] / SIGMA2[0, 0]) < 0.02 * abs(
        SIGMA2[1, 0] / SIGMA2[0, 0]
    )


# ---------------------------------------------------------------------------
# compound-Gaussian mixture
# ---------------------------------------------------------------------------


def test_mixture_degenerate_texture_gaussian():
    spec = spec_of(F.gaussian(2), sigma=SIGMA2)
    for x in (np.zeros(2), np.array([1.0, -0.5])):
        assert np.isclose(
            D.pdf_cg_mixture(spec, x).log_pdf, D.pdf_res(spec, x).log_pdf, rtol=1e-12
        )


def test_mixture_student_matches_closed_form():
    spec = spec_of(F.student(2, 4.0), sigma=SIGMA2)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(0, 2, 2)
        mix = D.pdf_cg_mixture(spec, x).log_pdf
        ref = D.pdf_res(spec, x).log_pdf
        assert abs(mix - ref) < 1e-6 * max(1.0, abs(ref))


def test_mixture_epscont_two_term_sum():
    eps, a2 = 0.15, 9.0
    kernel = F.epscont(2, eps, a2, scale="raw")
    spec = spec_of(kernel, sigma=SIGMA2)
    heavy = stats.multivariate_normal(cov=a2 * SIGMA2)
    base = stats.multivariate_normal(cov=SIGMA2)
    for x in (np.zeros(2), np.array([2.0, 1.0]), np.array([-4.0, 0.5])):
        want = eps * heavy.pdf(x) + (1 - eps) * base.pdf(x)
        assert np.isclose(D.pdf_cg_mixture(spec, x).pdf, want, rtol=1e-10)
        assert np.isclose(D.pdf_res(spec, x).pdf, want, rtol=1e-10)


def test_mixture_k_matches_bessel_form():
    spec = spec_of(F.kdist(2, 1.5), sigma=SIGMA2)
    for x in (np.array([0.5, 0.2]), np.array([2.0, -1.0])):
        mix = D.pdf_cg_mixture(spec, x).log_pdf
        ref = D.pdf_res(spec, x).log_pdf
        assert abs(mix - ref) < 1e-6 * max(1.0, abs(ref))


def test_mixture_requires_texture():
    spec = spec_of(F.gg(2, 2.0), sigma=SIGMA2)
    with pytest.raises(ValueError):
        D.pdf_cg_mixture(spec, np.zeros(2))
