"""Tests for hierarchical fits, regression and posterior functionals."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, special

from bayes_primer.const import ERROR_ITERATIONS, HIER_LOG_K_MAX
from bayes_primer.errors import DataError, ParameterError, SettingsError
from bayes_primer.mcmc import DrawMatrix, gibbs_normal
from bayes_primer.models import (
    FunctionalKind,
    GroupCounts,
    GroupMeans,
    RegressionData,
    fit_hierarchical_means,
    fit_hierarchical_proportions,
    fit_logistic,
    posterior_functional,
    sim_linear_regression,
)


def mc_error(draws: np.ndarray, ess: float | None = None) -> float:
    """Monte Carlo standard error of a mean."""
    return float(draws.std() / math.sqrt(ess if ess is not None else draws.size))


def hierarchical_oracle(y: tuple[int, ...], n: tuple[int, ...], group: int) -> float:
    """Posterior mean of p_group by grid integration over (eta, log K)."""
    eta = (np.arange(400) + 0.5) / 400
    log_k = (np.arange(400) + 0.5) / 400 * HIER_LOG_K_MAX
    eta_grid, k_grid = np.meshgrid(eta, np.exp(log_k), indexing="ij")
    a, b = k_grid * eta_grid, k_grid * (1 - eta_grid)
    log_w = sum(special.betaln(a + yj, b + nj - yj) - special.betaln(a, b) for yj, nj in zip(y, n))
    w = np.exp(log_w - log_w.max())
    conditional = (a + y[group]) / (k_grid + n[group])
    return float(np.sum(w * conditional) / np.sum(w))


class TestGroupData:
    """Tests for group data validation."""

    def test_counts_checked(self):
        """Counts need y <= n, two groups and matching labels."""
        with pytest.raises(DataError):
            GroupCounts((5, 3), (4, 10))
        with pytest.raises(DataError, match="at least 2 groups"):
            GroupCounts((1,), (10,))
        with pytest.raises(DataError, match="labels"):
            GroupCounts((1, 2), (10, 10), ("a",))

    def test_pooled_rate(self):
        """The pooled rate is total successes over total trials."""
        assert GroupCounts((1, 9), (10, 10)).pooled_rate == 0.5

    def test_means_checked(self):
        """Means need n >= 1 and a positive sd."""
        with pytest.raises(DataError):
            GroupMeans((1.0, 2.0), (0, 3), 1.0)
        with pytest.raises(ParameterError):
            GroupMeans((1.0, 2.0), (3, 3), 0.0)


class TestHierarchicalProportions:
    """Tests for partial pooling of proportions."""

    def test_shrinkage_between_raw_and_pooled(self):
        """Each group mean sits between its raw rate and the pooled rate."""
        report = fit_hierarchical_proportions(GroupCounts((1, 9), (10, 10)), 20_000, 2_000, seed=4)
        assert report.draws.columns == ("p_1", "p_2", "eta", "K")
        low = report.draws.column("p_1").mean()
        high = report.draws.column("p_2").mean()
        assert 0.1 < low < 0.5 < high < 0.9

    def test_matches_grid_oracle(self):
        """J = 2 draws agree with grid integration of the hyperparameters."""
        y, n = (1, 9), (10, 10)
        report = fit_hierarchical_proportions(GroupCounts(y, n), 55_000, 5_000, seed=21)
        for j in (0, 1):
            assert report.draws.column(f"p_{j + 1}").mean() == pytest.approx(
                hierarchical_oracle(y, n, j), abs=0.01
            )

    def test_identical_groups(self):
        """Exchangeable groups with equal data get equal posterior means."""
        report = fit_hierarchical_proportions(GroupCounts((3, 3, 3), (10, 10, 10)), 20_000, 2_000, seed=8)
        means = [report.draws.column(f"p_{j}").mean() for j in (1, 2, 3)]
        tolerance = 3 * math.sqrt(2) * max(
            mc_error(report.draws.column(f"p_{j}"), report.ess[f"p_{j}"]) for j in (1, 2, 3)
        )
        assert max(means) - min(means) < tolerance

    def test_hyperparameters_in_range(self):
        """eta stays in (0, 1) and K in [1, 10^4]."""
        report = fit_hierarchical_proportions(GroupCounts((2, 5), (10, 12)), 5_000, 500, seed=2)
        eta, k = report.draws.column("eta"), report.draws.column("K")
        assert np.all((eta > 0) & (eta < 1))
        assert np.all((k >= 1) & (k <= 1e4 + 1e-6))
        assert report.acceptance_rate is not None

    def test_deterministic(self):
        """The seed fixes the draws."""
        data = GroupCounts((2, 5), (10, 12))
        first = fit_hierarchical_proportions(data, 1_000, 100, seed=3)
        second = fit_hierarchical_proportions(data, 1_000, 100, seed=3)
        assert np.array_equal(first.draws.values, second.draws.values)


class TestHierarchicalMeans:
    """Tests for partial pooling of normal means."""

    def test_data_dominant_limit(self):
        """A tiny sampling sd leaves each mean at its data value."""
        data = GroupMeans((1.0, 5.0, 9.0), (1, 1, 1), 1e-6)
        report = fit_hierarchical_means(data, 5_000, 500, seed=6)
        for j, ybar in enumerate(data.ybar, start=1):
            assert report.draws.column(f"mu_{j}").mean() == pytest.approx(ybar, abs=0.01)

    def test_identical_groups(self):
        """Equal summaries give equal posterior means."""
        report = fit_hierarchical_means(GroupMeans((2.0, 2.0, 2.0), (5, 5, 5), 1.0), 20_000, 2_000, seed=1)
        means = [report.draws.column(f"mu_{j}").mean() for j in (1, 2, 3)]
        tolerance = 3 * math.sqrt(2) * max(
            mc_error(report.draws.column(f"mu_{j}"), report.ess[f"mu_{j}"]) for j in (1, 2, 3)
        )
        assert max(means) - min(means) < tolerance

    def test_shrinkage_ordering(self):
        """The group farthest from the grand mean moves the most."""
        data = GroupMeans((0.0, 1.0, 4.0), (4, 4, 4), 2.0)
        report = fit_hierarchical_means(data, 30_000, 3_000, seed=17)
        grand = float(np.mean(data.ybar))
        moves = []
        for j, ybar in enumerate(data.ybar, start=1):
            mean = report.draws.column(f"mu_{j}").mean()
            lo, hi = sorted((ybar, grand))
            assert lo - 0.05 <= mean <= hi + 0.05
            moves.append(abs(mean - ybar))
        assert moves[2] == max(moves)
        assert report.draws.columns[-2:] == ("tau_mean", "tau_sd")


class TestLinearRegression:
    """Tests for direct simulation from the linear model."""

    def test_three_point_slope(self):
        """x = 0, 1, 2 and y = 1, 2, 2 centre the slope on 1/2.

        With one residual degree of freedom the slope marginal is a Cauchy,
        so the median is the stable summary.
        """
        data = RegressionData.with_intercept([0.0, 1.0, 2.0], [1.0, 2.0, 2.0])
        draws = sim_linear_regression(data, 100_000, 13)
        assert draws.columns == ("beta_1", "beta_2", "sigma")
        assert np.median(draws.column("beta_2")) == pytest.approx(0.5, abs=0.01)
        assert np.median(draws.column("beta_1")) == pytest.approx(7 / 6, abs=0.01)

    def test_moments(self):
        """beta draws centre on least squares; sigma^2 on its inverse chi-square mean."""
        rng = np.random.default_rng(33)
        x = np.arange(1.0, 21.0)
        y = 1.0 + 0.5 * x + rng.normal(0, 1.5, x.size)
        data = RegressionData.with_intercept(x, y)
        draws = sim_linear_regression(data, 100_000, 14)
        beta_hat = np.linalg.lstsq(data.x, data.y, rcond=None)[0]
        for j, name in enumerate(("beta_1", "beta_2")):
            column = draws.column(name)
            assert abs(column.mean() - beta_hat[j]) < 3 * mc_error(column)
        sigma2 = draws.column("sigma") ** 2
        rss = float(np.sum((data.y - data.x @ beta_hat) ** 2))
        dof = data.n - data.k
        assert abs(sigma2.mean() - rss / (dof - 2)) < 3 * mc_error(sigma2)

    def test_intercept_only_matches_gibbs(self, normal_sample):
        """A constant-only regression is the normal mean problem."""
        data = RegressionData(np.ones((normal_sample.size, 1)), normal_sample)
        direct = sim_linear_regression(data, 100_000, 15).column("beta_1")
        gibbs = gibbs_normal(normal_sample, 22_000, 2_000, seed=16).draws.column("mu")
        assert direct.mean() == pytest.approx(gibbs.mean(), abs=0.01)
        assert direct.std() == pytest.approx(gibbs.std(), abs=0.01)

    def test_group_indicator(self):
        """The indicator coefficient is the difference of group means."""
        y = np.array([5.1, 4.8, 5.6, 5.0, 4.7, 6.2, 6.6, 5.9, 6.4, 6.1])
        group = np.array([0.0] * 5 + [1.0] * 5)
        draws = sim_linear_regression(RegressionData.with_intercept(group, y), 100_000, 18)
        diff = y[5:].mean() - y[:5].mean()
        effect = draws.column("beta_2")
        assert abs(effect.mean() - diff) < 3 * mc_error(effect)

    def test_names_used(self):
        """Coefficient names label the draw columns."""
        data = RegressionData(np.column_stack([np.ones(4), [1.0, 2.0, 4.0, 3.0]]), [1.0, 2.0, 2.5, 2.0], ("const", "dose"))
        assert sim_linear_regression(data, 10, 1).columns == ("const", "dose", "sigma")

    def test_invalid_data(self):
        """Rank deficiency, missing intercept, too few rows and exact fits are rejected."""
        with pytest.raises(DataError, match="rank deficient"):
            RegressionData(np.column_stack([np.ones(4), np.ones(4)]), np.arange(4.0))
        with pytest.raises(DataError, match="all ones"):
            RegressionData(np.column_stack([np.arange(4.0), np.ones(4)]), np.arange(4.0))
        with pytest.raises(DataError, match="more observations"):
            RegressionData.with_intercept([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(DataError, match="exactly"):
            sim_linear_regression(RegressionData.with_intercept([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]), 10, 1)
        with pytest.raises(ParameterError):
            sim_linear_regression(RegressionData.with_intercept([0.0, 1.0, 2.0], [1.0, 2.0, 2.0]), 0, 1)


class TestPosteriorFunctional:
    """Tests for row-wise functionals."""

    @pytest.fixture(name="normal_draws")
    def normal_draws_fixture(self) -> DrawMatrix:
        """Rows of (mu, sigma2)."""
        rng = np.random.default_rng(5)
        return DrawMatrix(("mu", "sigma2"), np.column_stack([rng.normal(3, 1, 200), rng.gamma(4, 1, 200)]))

    def test_median_is_location(self, normal_draws):
        """q = 0.5 returns the mu column."""
        out = posterior_functional(normal_draws, FunctionalKind.NORMAL_PERCENTILE, q=0.5)
        np.testing.assert_allclose(out.values[:, 0], normal_draws.column("mu"), atol=1e-12)
        assert out.columns == ("percentile_0.5",)

    def test_standard_normal_percentile(self):
        """mu = 0 and sigma = 1 give z_0.9 in every row."""
        draws = DrawMatrix(("mu", "sigma"), np.column_stack([np.zeros(5), np.ones(5)]))
        out = posterior_functional(draws, "normal_percentile", q=0.9)
        np.testing.assert_allclose(out.values[:, 0], 1.2815515655446004, atol=1e-9)

    def test_standardized_effect(self):
        """beta / sigma row by row."""
        draws = DrawMatrix(("beta_1", "beta_2", "sigma"), np.tile([0.3, 1.0, 2.0], (4, 1)))
        out = posterior_functional(draws, "standardized_effect")
        assert out.columns == ("effect_size",)
        np.testing.assert_allclose(out.values[:, 0], 0.5)

    def test_monotone_in_level(self, normal_draws):
        """Higher levels give larger percentiles in every row."""
        lower = posterior_functional(normal_draws, "normal_percentile", q=0.2).values
        upper = posterior_functional(normal_draws, "normal_percentile", q=0.8).values
        assert np.all(upper > lower)

    def test_sigma_from_variance(self, normal_draws):
        """sqrt(sigma2) stands in for a missing sigma column."""
        out = posterior_functional(normal_draws, "normal_percentile", q=0.9)
        expected = normal_draws.column("mu") + 1.2815515655446004 * np.sqrt(normal_draws.column("sigma2"))
        np.testing.assert_allclose(out.values[:, 0], expected, rtol=1e-9)

    def test_errors(self, normal_draws):
        """Missing columns and levels outside (0, 1) are rejected."""
        with pytest.raises(DataError, match="missing column"):
            posterior_functional(normal_draws, "standardized_effect")
        with pytest.raises(ParameterError):
            posterior_functional(normal_draws, "normal_percentile", q=1.0)


class TestLogistic:
    """Tests for logistic regression."""

    def test_all_successes(self, caplog):
        """All-one responses push the intercept positive and warn."""
        data = RegressionData(np.ones((10, 1)), np.ones(10))
        report = fit_logistic(data, 20_000, 2_000, seed=3)
        assert np.mean(report.draws.column("beta_1") > 0) > 0.9
        assert any("all responses are equal" in note for note in report.warnings)
        assert "Logistic fit" in caplog.text

    def test_quadrature_oracle(self):
        """Intercept-only with y = 1, 1, 0 matches 1-D quadrature."""
        y = np.array([1.0, 1.0, 0.0])

        def density(b: float) -> float:
            loglik = np.sum(y * special.log_expit(b) + (1 - y) * special.log_expit(-b))
            return math.exp(loglik - b * b / 200.0)

        mass, _ = integrate.quad(density, -60, 60, limit=200)
        first, _ = integrate.quad(lambda b: b * density(b), -60, 60, limit=200)
        report = fit_logistic(RegressionData(np.ones((3, 1)), y), 200_000, 10_000, seed=7, prior_sd=10.0)
        assert report.draws.column("beta_1").mean() == pytest.approx(first / mass, abs=0.02)

    def test_concentrates_with_data(self):
        """Ten copies of the data shrink the posterior sd."""
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        y = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 1.0])
        small = fit_logistic(RegressionData.with_intercept(x, y), 20_000, 2_000, seed=9)
        large = fit_logistic(RegressionData.with_intercept(np.tile(x, 10), np.tile(y, 10)), 20_000, 2_000, seed=9)
        assert large.draws.column("beta_1").std() < small.draws.column("beta_1").std()
        assert not large.warnings or all("separates" not in note for note in large.warnings)

    def test_separation_warning(self):
        """A covariate that splits the responses is reported."""
        data = RegressionData.with_intercept([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 1.0, 1.0])
        report = fit_logistic(data, 2_000, 200, seed=1)
        assert any("separates" in note for note in report.warnings)

    def test_invalid_inputs(self):
        """Non-binary responses, bad priors and empty runs are rejected."""
        data = RegressionData.with_intercept([1.0, 2.0, 3.0], [0.0, 2.0, 1.0])
        with pytest.raises(DataError, match="0/1"):
            fit_logistic(data, 100, 10)
        binary = RegressionData.with_intercept([1.0, 2.0, 3.0], [0.0, 1.0, 1.0])
        with pytest.raises(ParameterError):
            fit_logistic(binary, 100, 10, prior_sd=0.0)
        with pytest.raises(SettingsError, match=ERROR_ITERATIONS):
            fit_logistic(binary, 100, 100)
