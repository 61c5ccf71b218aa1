"""Tests for discrete-prior Bayes."""
from __future__ import annotations

from collections import Counter
import itertools

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from bayes_primer.const import ERROR_IMPOSSIBLE_DATA, ERROR_NO_DIAGONAL
from bayes_primer.discrete import (
    BinomialLikelihood,
    DiscreteTable,
    NormalLikelihood,
    TableLikelihood,
    bayes_update,
    log_evidence,
    make_grid_prior,
    prob_equal,
    prob_first_smaller,
    sample_table,
    sequential_update,
    spinner_likelihoods,
    summarize_grid,
    table_event_prob,
    table_from_frame,
    table_interval,
    table_marginal,
    table_mean,
    table_to_frame,
    two_proportion_update,
)
from bayes_primer.errors import DataError, ImpossibleDataError, ParameterError

GRID = [round(0.1 * i, 1) for i in range(1, 10)]


@pytest.fixture(name="three_point")
def three_point_fixture() -> DiscreteTable:
    """Uniform prior on {0.3, 0.5, 0.7}."""
    return DiscreteTable.uniform([0.3, 0.5, 0.7])


@pytest.fixture(name="figure_posterior")
def figure_posterior_fixture() -> DiscreteTable:
    """Uniform 9 x 9 grid updated with 4/12 and 6/12 successes."""
    return two_proportion_update(make_grid_prior(GRID, GRID), (4, 12, 6, 12))


class TestDiscreteTable:
    """Tests for table construction."""

    def test_probabilities_must_sum_to_one(self):
        """Probabilities off by more than 1e-10 are rejected."""
        with pytest.raises(DataError, match="sum to"):
            DiscreteTable(((0.1,), (0.2,)), np.array([0.5, 0.6]))

    def test_distinct_points(self):
        """Duplicate support points are rejected."""
        with pytest.raises(DataError, match="distinct"):
            DiscreteTable.uniform([0.5, 0.5])

    def test_negative_weight(self):
        """Negative weights are rejected."""
        with pytest.raises(DataError):
            DiscreteTable.from_weights([0.1, 0.2], [1.0, -1.0])

    def test_probabilities_read_only(self, three_point):
        """A table's probability vector cannot be modified in place."""
        with pytest.raises(ValueError):
            three_point.probs[0] = 1.0

    def test_prob_of(self, three_point):
        """Probability lookup by point; absent points have probability zero."""
        assert three_point.prob_of(0.5) == pytest.approx(1 / 3)
        assert three_point.prob_of(0.4) == 0.0


class TestBayesUpdate:
    """Tests for bayes_update."""

    def test_single_success(self, three_point):
        """One success in one trial gives probabilities proportional to p."""
        posterior = bayes_update(three_point, BinomialLikelihood(1, 1))
        np.testing.assert_allclose(posterior.probs, [0.2, 1 / 3, 7 / 15], atol=1e-12)

    def test_no_trials_leaves_prior(self, three_point):
        """Zero trials carry no information."""
        posterior = bayes_update(three_point, BinomialLikelihood(0, 0))
        assert posterior.allclose(three_point)

    def test_point_mass_stays(self):
        """A point-mass prior is unchanged by evaluable data."""
        prior = DiscreteTable.uniform([0.4])
        posterior = bayes_update(prior, BinomialLikelihood(7, 10))
        assert posterior.probs.tolist() == [1.0]

    def test_impossible_data(self):
        """Data with zero likelihood at every point raises."""
        prior = DiscreteTable.uniform([0.0, 1.0])
        with pytest.raises(ImpossibleDataError, match=ERROR_IMPOSSIBLE_DATA):
            bayes_update(prior, TableLikelihood((0.0, 0.0)))

    def test_large_counts_do_not_underflow(self):
        """Products formed in log space survive very small likelihoods."""
        prior = DiscreteTable.uniform([0.49, 0.5, 0.51])
        posterior = bayes_update(prior, BinomialLikelihood(50_000, 100_000))
        assert posterior.probs.argmax() == 1
        assert posterior.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self, three_point):
        """Multiplying a likelihood table by a constant changes nothing."""
        values = (0.2, 0.5, 0.3)
        first = bayes_update(three_point, TableLikelihood(values))
        second = bayes_update(three_point, TableLikelihood(tuple(7.5 * v for v in values)))
        assert first.allclose(second, atol=1e-12)

    def test_table_length_mismatch(self, three_point):
        """A likelihood table must cover every support point."""
        with pytest.raises(DataError, match="2 values for 3"):
            bayes_update(three_point, TableLikelihood((0.5, 0.5)))

    def test_binomial_counts_validated(self):
        """y above n is rejected at construction."""
        with pytest.raises(DataError):
            BinomialLikelihood(5, 3)

    def test_normal_likelihood(self):
        """Normal data favour support points near the sample mean."""
        prior = DiscreteTable.uniform([90.0, 100.0, 110.0], labels=("mu",))
        posterior = bayes_update(prior, NormalLikelihood(101.0, 16, 20.0))
        expected = stats.norm.pdf(101.0, [90.0, 100.0, 110.0], 5.0)
        np.testing.assert_allclose(posterior.probs, expected / expected.sum(), atol=1e-12)

    def test_dense_grid_matches_conjugate(self):
        """A fine uniform grid reproduces the Beta(1 + y, 1 + n - y) mean."""
        grid = DiscreteTable.uniform(np.round(np.arange(0.0005, 1.0, 0.001), 4))
        posterior = bayes_update(grid, BinomialLikelihood(4, 12))
        assert table_mean(posterior)[0] == pytest.approx(5 / 14, abs=1e-4)

    def test_log_evidence(self, three_point):
        """The log evidence is the log of the prior-weighted likelihood sum."""
        expected = np.mean([stats.binom.pmf(3, 5, p) for p in (0.3, 0.5, 0.7)])
        assert log_evidence(three_point, BinomialLikelihood(3, 5)) == pytest.approx(
            np.log(expected)
        )


class TestSequentialUpdate:
    """Tests for sequential_update."""

    def test_matches_pooled_data(self, three_point):
        """Two binomial samples equal one pooled sample."""
        stepwise = sequential_update(
            three_point, [BinomialLikelihood(2, 5), BinomialLikelihood(4, 7)]
        )
        pooled = bayes_update(three_point, BinomialLikelihood(6, 12))
        assert stepwise.allclose(pooled, atol=1e-12)

    def test_empty_sequence(self, three_point):
        """No observations leave the prior unchanged."""
        assert sequential_update(three_point, []) is three_point

    def test_order_invariance(self, three_point):
        """Every ordering of the observations gives the same table."""
        observations = [BinomialLikelihood(1, 3), BinomialLikelihood(0, 2), BinomialLikelihood(4, 4)]
        reference = sequential_update(three_point, observations)
        for order in itertools.permutations(observations):
            assert sequential_update(three_point, order).allclose(reference, atol=1e-12)

    def test_spinner_identity(self):
        """Spinner outcomes update per spin as one joint likelihood would."""
        prior = DiscreteTable.uniform([1.0, 2.0])
        areas = [
            {"red": 1.0, "blue": 1.0, "green": 2.0},
            {"red": 2.0, "blue": 1.0, "green": 1.0},
        ]
        outcomes = ["red", "red", "green", "blue", "red"]
        stepwise = sequential_update(prior, spinner_likelihoods(areas, outcomes))

        joint = np.ones(2)
        for outcome in outcomes:
            joint *= [spinner[outcome] / sum(spinner.values()) for spinner in areas]
        np.testing.assert_allclose(stepwise.probs, joint / joint.sum(), atol=1e-12)
        assert stepwise.probs[1] > stepwise.probs[0]

    def test_spinner_needs_area(self):
        """A spinner without area is rejected."""
        with pytest.raises(DataError):
            spinner_likelihoods([{"red": 0.0}], ["red"])


class TestGridPrior:
    """Tests for make_grid_prior."""

    def test_uniform_grid(self):
        """Zero diagonal mass gives 81 equal points."""
        prior = make_grid_prior(GRID, GRID)
        assert len(prior.points) == 81
        np.testing.assert_allclose(prior.probs, 1 / 81)
        assert prior.labels == ("p1", "p2")

    def test_diagonal_mass(self):
        """Half the mass split over the diagonal, half off it."""
        prior = make_grid_prior(GRID, GRID, diagonal_mass=0.5)
        for (p1, p2), prob in zip(prior.points, prior.probs):
            expected = 0.5 / 9 if p1 == p2 else 0.5 / 72
            assert prob == pytest.approx(expected, abs=1e-14)
        assert prob_equal(prior) == pytest.approx(0.5)

    def test_no_diagonal_points(self):
        """Diagonal mass without diagonal points is an error."""
        with pytest.raises(DataError, match=ERROR_NO_DIAGONAL):
            make_grid_prior([0.2], [0.4], diagonal_mass=0.3)

    def test_all_points_on_diagonal(self, caplog):
        """A diagonal-only grid stays uniform and says so."""
        prior = make_grid_prior([0.3], [0.3], diagonal_mass=0.4)
        assert prior.points == ((0.3, 0.3),)
        np.testing.assert_allclose(prior.probs, [1.0])
        assert "diagonal mass 0.4 ignored" in caplog.text

    @pytest.mark.parametrize(
        "values", [[], [0.2, 0.1], [0.5, 1.5], [0.3, 0.3]]
    )
    def test_bad_values(self, values):
        """Empty, unsorted or out-of-range value vectors are rejected."""
        with pytest.raises(DataError):
            make_grid_prior(values, GRID)

    def test_diagonal_mass_range(self):
        """Diagonal mass must lie in [0, 1)."""
        with pytest.raises(ParameterError):
            make_grid_prior(GRID, GRID, diagonal_mass=1.0)


class TestTwoProportions:
    """Tests for two-proportion grid inference."""

    def test_enumeration_oracle(self, figure_posterior):
        """The grid posterior equals a brute-force enumeration."""
        weights = {
            (p1, p2): stats.binom.pmf(4, 12, p1) * stats.binom.pmf(6, 12, p2)
            for p1 in GRID
            for p2 in GRID
        }
        total = sum(weights.values())
        for point, prob in zip(figure_posterior.points, figure_posterior.probs):
            assert prob == pytest.approx(weights[point] / total, abs=1e-12)
        oracle = sum(w for (p1, p2), w in weights.items() if p1 < p2) / total
        assert prob_first_smaller(figure_posterior) == pytest.approx(oracle, abs=1e-12)

    def test_marginals_match_beta_simulation(self, figure_posterior):
        """Grid marginal means agree with independent Beta(5, 9) and Beta(7, 7) draws."""
        rng = np.random.default_rng(1)
        mean_p1, mean_p2 = table_mean(figure_posterior)
        assert mean_p1 == pytest.approx(rng.beta(5, 9, 100_000).mean(), abs=0.02)
        assert mean_p2 == pytest.approx(rng.beta(7, 7, 100_000).mean(), abs=0.02)
        marginal = table_marginal(figure_posterior, 0)
        assert marginal.labels == ("p1",)
        assert table_mean(marginal)[0] == pytest.approx(mean_p1, abs=1e-12)

    def test_summary(self, figure_posterior):
        """Summaries report means, event probabilities and the mode."""
        summary = summarize_grid(figure_posterior)
        assert summary.mode == (0.3, 0.5)
        assert summary.prob_p1_smaller + summary.prob_equal < 1.0
        assert summary.prob_p1_smaller > 0.5

    def test_no_data(self):
        """Zero trials leave the grid prior unchanged."""
        prior = make_grid_prior(GRID, GRID, diagonal_mass=0.3)
        assert two_proportion_update(prior, (0, 0, 0, 0)).allclose(prior)

    def test_diagonal_only_prior(self):
        """A diagonal-only prior stays on the diagonal and moves to 0.5."""
        prior = DiscreteTable.uniform([(p, p) for p in GRID])
        posterior = two_proportion_update(prior, (0, 10, 10, 10))
        assert prob_equal(posterior) == pytest.approx(1.0)
        assert posterior.points[int(posterior.probs.argmax())] == (0.5, 0.5)

    def test_one_dimensional_prior_rejected(self, three_point):
        """Two-proportion data need a 2-D prior."""
        with pytest.raises(DataError, match="2-D"):
            two_proportion_update(three_point, (1, 2, 1, 2))


class TestSummaries:
    """Tests for event probabilities, intervals and sampling."""

    def test_event_probabilities(self, three_point):
        """Always-true and never-true predicates."""
        assert table_event_prob(three_point, lambda p: True) == pytest.approx(1.0)
        point_mass = DiscreteTable.uniform([0.4])
        assert table_event_prob(point_mass, lambda p: p > 0.5) == 0.0

    def test_interval(self):
        """Each end is the first point whose cumulative probability reaches its tail level."""
        table = DiscreteTable.uniform([0.1, 0.2, 0.3, 0.4])
        assert table_interval(table, 0.5) == (0.1, 0.3)
        assert table_interval(table, 0.2) == (0.2, 0.3)

    def test_interval_needs_one_dimension(self, figure_posterior):
        """Intervals are defined for 1-D tables."""
        with pytest.raises(DataError):
            table_interval(figure_posterior, 0.5)

    def test_sample_point_mass(self):
        """A point mass always yields the same point."""
        assert sample_table(DiscreteTable.uniform([0.4]), 20, 3) == [(0.4,)] * 20

    def test_sample_frequencies(self):
        """Empirical frequencies approach the table probabilities."""
        table = DiscreteTable(((0.3,), (0.5,), (0.7,)), np.array([0.2, 1 / 3, 7 / 15]))
        draws = sample_table(table, 100_000, 99)
        counts = Counter(point[0] for point in draws)
        for point, prob in zip(table.points, table.probs):
            assert counts[point[0]] / 100_000 == pytest.approx(prob, abs=0.01)

    def test_sample_deterministic(self, three_point):
        """Equal seeds give equal draw sequences."""
        assert sample_table(three_point, 50, 8) == sample_table(three_point, 50, 8)


class TestFrames:
    """Tests for the CSV-shaped frame view."""

    def test_two_dimensional_frame(self, figure_posterior):
        """A 2-D table becomes point_1, point_2, prob columns and back."""
        frame = table_to_frame(figure_posterior)
        assert list(frame.columns) == ["point_1", "point_2", "prob"]
        restored = table_from_frame(frame, ("p1", "p2"))
        assert restored.allclose(figure_posterior)

    def test_missing_columns(self):
        """Frames without prob are rejected."""
        with pytest.raises(DataError):
            table_from_frame(pd.DataFrame({"point_1": [0.1]}))
