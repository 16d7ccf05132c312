import numpy as np
import pytest
from scipy import integrate, stats

from gibbsreg.distributions import (
    NonSpdError,
    beta_sample,
    categorical_sample,
    dirichlet_sample,
    gamma_sample,
    inv_gamma_sample,
    inv_wishart_sample,
    make_rng,
    mvn_logpdf,
    mvn_sample,
    mvn_sample_from_precision,
    spd_cholesky,
)

N_DRAWS = 100_000


def test_rng_determinism():
    a = make_rng(123).standard_normal(10)
    b = make_rng(123).standard_normal(10)
    assert np.array_equal(a, b)


class TestMvnSample:
    def test_standard_normal_mean(self):
        draws = mvn_sample(np.zeros(2), np.eye(2), make_rng(0), size=N_DRAWS)
        tol = 3.0 / np.sqrt(N_DRAWS)
        assert np.all(np.abs(draws.mean(axis=0)) < tol)

    def test_diagonal_scaling_matches_standard_stream(self):
        scaled = mvn_sample([0.0], [[4.0]], make_rng(7), size=100)
        standard = mvn_sample([0.0], [[1.0]], make_rng(7), size=100)
        assert np.array_equal(scaled, 2.0 * standard)

    def test_sample_covariance(self):
        cov = np.array([[2.0, 1.0], [1.0, 2.0]])
        draws = mvn_sample([1.0, 2.0], cov, make_rng(3), size=N_DRAWS)
        emp = np.cov(draws, rowvar=False)
        assert np.all(np.abs(emp - cov) < 0.05 * np.abs(cov))

    def test_non_spd_raises_with_name(self):
        with pytest.raises(NonSpdError, match="cov"):
            mvn_sample([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], make_rng(0))

    def test_determinism(self):
        a = mvn_sample([0.0, 1.0], np.eye(2), make_rng(5), size=4)
        b = mvn_sample([0.0, 1.0], np.eye(2), make_rng(5), size=4)
        assert np.array_equal(a, b)


class TestMvnLogpdf:
    def test_standard_scalar(self):
        assert mvn_logpdf(0.0, 0.0, [[1.0]]) == pytest.approx(
            -0.5 * np.log(2 * np.pi), abs=1e-12
        )

    def test_at_mean_general_cov(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        expected = -np.log(2 * np.pi) - 0.5 * np.log(np.linalg.det(cov))
        assert mvn_logpdf([3.0, -1.0], [3.0, -1.0], cov) == pytest.approx(
            expected, abs=1e-12
        )

    def test_hand_evaluated_point(self):
        # x=(1,0), mean=0, cov=diag(2,1): -ln(2π) - ln(2)/2 - 1/4
        expected = -np.log(2 * np.pi) - 0.5 * np.log(2.0) - 0.25
        got = mvn_logpdf([1.0, 0.0], [0.0, 0.0], [[2.0, 0.0], [0.0, 1.0]])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_integrates_to_one_1d(self):
        mean, var = 0.3, 2.5
        sd = np.sqrt(var)
        grid = np.linspace(mean - 10 * sd, mean + 10 * sd, 40_001)
        dens = np.exp([mvn_logpdf(g, mean, [[var]]) for g in grid])
        assert abs(integrate.simpson(dens, x=grid) - 1.0) < 1e-6

    def test_non_spd_raises(self):
        with pytest.raises(NonSpdError, match="cov"):
            mvn_logpdf([0.0], [0.0], [[-1.0]])


class TestMvnFromPrecision:
    def test_matches_covariance_form(self):
        # precision diag(4) <=> cov diag(0.25); shift = P @ mean
        prec = np.diag([4.0, 2.0])
        mean = np.array([1.0, -2.0])
        draws = np.array(
            [mvn_sample_from_precision(prec, prec @ mean, make_rng(s)) for s in range(20_000)]
        )
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 0.02)
        emp = np.cov(draws, rowvar=False)
        assert np.all(np.abs(emp - np.linalg.inv(prec)) < 0.02)

    def test_batched_shape(self):
        prec = np.tile(np.eye(2), (5, 1, 1))
        shift = np.zeros((5, 2))
        out = mvn_sample_from_precision(prec, shift, make_rng(0))
        assert out.shape == (5, 2)


class TestInvWishart:
    def test_mean_identity_1d(self):
        draws = inv_wishart_sample(5.0, [[3.0]], make_rng(11), size=N_DRAWS)
        # E[W] = S/(df - p - 1) = 3/3 = 1
        assert draws.mean() == pytest.approx(1.0, rel=0.05)

    def test_every_draw_spd(self):
        draws = inv_wishart_sample(4.0, np.array([[2.0, 0.3], [0.3, 1.0]]), make_rng(2), size=200)
        for w in draws:
            spd_cholesky(w, "draw")

    def test_mean_identity_2d(self):
        draws = inv_wishart_sample(6.0, np.eye(2), make_rng(13), size=N_DRAWS)
        emp = draws.mean(axis=0)
        assert np.all(np.abs(emp - np.eye(2) / 3.0) < 0.05 * (1.0 / 3.0))

    def test_low_df_rejected(self):
        with pytest.raises(ValueError, match="df"):
            inv_wishart_sample(1.0, np.eye(2), make_rng(0))

    def test_non_spd_scale_rejected(self):
        with pytest.raises(NonSpdError, match="scale"):
            inv_wishart_sample(5.0, [[1.0, 2.0], [2.0, 1.0]], make_rng(0))


class TestGammaFamily:
    def test_gamma_1_is_exponential(self):
        rate = 2.5
        draws = gamma_sample(1.0, rate, make_rng(4), size=N_DRAWS)
        se = (1.0 / rate) / np.sqrt(N_DRAWS)
        assert abs(draws.mean() - 1.0 / rate) < 3 * se

    def test_inv_gamma_reciprocal_identity(self):
        a, b = 3.0, 2.0
        inv_draws = 1.0 / inv_gamma_sample(a, b, make_rng(8), size=N_DRAWS)
        # one-sample KS against the Gamma(a, rate=b) law
        ks = stats.kstest(inv_draws, stats.gamma(a, scale=1.0 / b).cdf)
        assert ks.statistic < 0.01

    def test_gamma_moments(self):
        draws = gamma_sample(3.0, 2.0, make_rng(6), size=N_DRAWS)
        assert draws.mean() == pytest.approx(1.5, rel=0.05)
        assert draws.var() == pytest.approx(0.75, rel=0.05)

    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (1.0, 0.0), (-2.0, 3.0)])
    def test_nonpositive_rejected(self, shape, rate):
        with pytest.raises(ValueError):
            gamma_sample(shape, rate, make_rng(0))
        with pytest.raises(ValueError):
            inv_gamma_sample(shape, rate, make_rng(0))

    def test_positive_draws(self):
        assert np.all(gamma_sample(0.5, 0.5, make_rng(1), size=1000) > 0)
        assert np.all(inv_gamma_sample(0.5, 0.5, make_rng(1), size=1000) > 0)


class TestDirichlet:
    def test_uniform_mean(self):
        draws = dirichlet_sample([1.0, 1.0], make_rng(9), size=N_DRAWS)
        se = np.sqrt((1.0 / 12.0) / N_DRAWS)
        assert np.all(np.abs(draws.mean(axis=0) - 0.5) < 3 * se)

    def test_mean_is_normalized_alpha(self):
        draws = dirichlet_sample([2.0, 6.0], make_rng(10), size=N_DRAWS)
        # Var_k = a_k (a0 - a_k) / (a0^2 (a0 + 1)) = 12/576 for both entries
        se = np.sqrt((12.0 / 576.0) / N_DRAWS)
        assert np.all(np.abs(draws.mean(axis=0) - [0.25, 0.75]) < 3 * se)

    def test_sums_to_one(self):
        draws = dirichlet_sample([0.2, 0.5, 1.5], make_rng(12), size=5000)
        assert np.all(np.abs(draws.sum(axis=1) - 1.0) < 1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            dirichlet_sample([1.0, 0.0], make_rng(0))


class TestCategorical:
    def test_minus_inf_never_drawn(self):
        draws = categorical_sample([0.0, -np.inf], make_rng(14), size=10_000)
        assert np.all(draws == 1)

    def test_normalization(self):
        draws = categorical_sample(np.log([1.0, 3.0]), make_rng(15), size=N_DRAWS)
        freq1 = np.mean(draws == 1)
        se = np.sqrt(0.25 * 0.75 / N_DRAWS)
        assert abs(freq1 - 0.25) < 3 * se

    def test_shift_invariance_same_seed(self):
        lw = np.log([0.2, 0.5, 0.3])
        a = categorical_sample(lw, make_rng(16), size=5000)
        b = categorical_sample(lw + 7.5, make_rng(16), size=5000)
        assert np.array_equal(a, b)

    def test_all_minus_inf_rejected(self):
        with pytest.raises(ValueError, match="-inf"):
            categorical_sample([-np.inf, -np.inf], make_rng(0))

    def test_indices_one_based(self):
        draws = categorical_sample(np.zeros(3), make_rng(17), size=1000)
        assert draws.min() == 1 and draws.max() == 3


class TestBeta:
    def test_uniform_case(self):
        draws = beta_sample(1.0, 1.0, make_rng(18), size=N_DRAWS)
        se = np.sqrt((1.0 / 12.0) / N_DRAWS)
        assert abs(draws.mean() - 0.5) < 3 * se

    def test_moments(self):
        draws = beta_sample(2.0, 2.0, make_rng(19), size=N_DRAWS)
        assert draws.mean() == pytest.approx(0.5, rel=0.05)
        assert draws.var() == pytest.approx(0.05, rel=0.05)

    def test_open_interval(self):
        draws = beta_sample(2.0, 3.0, make_rng(20), size=10_000)
        assert np.all((draws > 0.0) & (draws < 1.0))

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            beta_sample(0.0, 1.0, make_rng(0))


def test_cross_kernel_determinism():
    def run(seed):
        rng = make_rng(seed)
        return (
            mvn_sample([0.0, 0.0], np.eye(2), rng),
            inv_wishart_sample(5.0, np.eye(2), rng),
            gamma_sample(2.0, 3.0, rng),
            dirichlet_sample([0.5, 0.5, 0.5], rng),
            categorical_sample(np.log([0.4, 0.6]), rng),
            beta_sample(2.0, 5.0, rng),
        )

    first, second = run(42), run(42)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)
