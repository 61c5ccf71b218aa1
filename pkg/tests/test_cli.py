"""Tests for the bayes-primer command line."""
from __future__ import annotations

import json
import math

import pytest
from scipy import stats

from bayes_primer.cli import build_parser, main
from bayes_primer.const import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, SEED_ENV_VAR, VERSION

from .conftest import MODELS


def run_json(capsys, argv: list[str]) -> dict:
    """Run a command that must succeed and parse its JSON output."""
    assert main(argv) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def run_lines(capsys, argv: list[str]) -> list[str]:
    """Run a command that must succeed and split its CSV output."""
    assert main(argv) == EXIT_OK
    return capsys.readouterr().out.splitlines()


@pytest.fixture(name="counts_csv")
def counts_csv_fixture(write_csv):
    """Four groups of binomial counts."""
    return write_csv("counts.csv", "group,y,n\nA,3,20\nB,7,20\nC,5,20\nD,12,20\n")


@pytest.fixture(name="regression_csv")
def regression_csv_fixture(write_csv):
    """Noisy straight line with five points."""
    return write_csv("reg.csv", "y,x\n1.1,1\n1.9,2\n3.2,3\n3.8,4\n5.1,5\n")


class TestConjugateCommands:
    """Tests for the beta and normal commands."""

    def test_beta_update(self, capsys):
        """Beta(1, 1) with 4 of 12 gives Beta(5, 9)."""
        payload = run_json(capsys, ["beta", "update", "--a", "1", "--b", "1", "--y", "4", "--n", "12", "--seed", "3"])
        assert payload == {"a_post": 5.0, "b_post": 9.0, "seed": 3}

    def test_beta_select(self, capsys):
        """The chosen beta matches both percentiles."""
        payload = run_json(
            capsys,
            ["beta", "select", "--q1", "0.5", "--x1", "0.3", "--q2", "0.9", "--x2", "0.5", "--seed", "1"],
        )
        assert stats.beta.ppf(0.5, payload["a"], payload["b"]) == pytest.approx(0.3, abs=1e-3)
        assert stats.beta.ppf(0.9, payload["a"], payload["b"]) == pytest.approx(0.5, abs=1e-3)

    def test_beta_interval(self, capsys):
        """Exact 90% interval of Beta(5, 9)."""
        payload = run_json(capsys, ["beta", "interval", "--a", "5", "--b", "9", "--seed", "1"])
        assert payload["lower"] == pytest.approx(stats.beta.ppf(0.05, 5, 9))
        assert payload["upper"] == pytest.approx(stats.beta.ppf(0.95, 5, 9))
        assert payload["method"] == "exact-quantile"

    def test_beta_predict_csv(self, capsys):
        """The predictive pmf is a CSV table over 0..m."""
        lines = run_lines(capsys, ["beta", "predict", "--a", "5", "--b", "9", "--m", "4", "--seed", "1"])
        assert lines[0] == "successes,prob,seed"
        assert len(lines) == 6
        assert sum(float(line.split(",")[1]) for line in lines[1:]) == pytest.approx(1.0)

    def test_normal_update(self, capsys):
        """Normal(0, 1) prior with y = 2, sigma = 1 gives Normal(1, 1/sqrt(2))."""
        payload = run_json(
            capsys,
            ["normal", "update", "--m0", "0", "--s0", "1", "--ybar", "2", "--n", "1", "--sigma", "1", "--seed", "1"],
        )
        assert payload["family"] == "normal"
        assert payload["mean"] == pytest.approx(1.0)
        assert payload["sd"] == pytest.approx(1 / math.sqrt(2))

    def test_normal_predict(self, capsys):
        """Predictive sd combines posterior and sampling sd."""
        payload = run_json(
            capsys, ["normal", "predict", "--mean", "1", "--sd", "3", "--sigma", "4", "--seed", "1"]
        )
        assert payload["sd"] == pytest.approx(5.0)


class TestDiscreteCommands:
    """Tests for discrete priors and grids."""

    def test_update_json(self, capsys):
        """A uniform three-point prior is updated by binomial data."""
        payload = run_json(
            capsys,
            ["discrete", "update", "--points", "0.2,0.5,0.8", "--y", "3", "--n", "9", "--format", "json", "--seed", "1"],
        )
        likes = [stats.binom.pmf(3, 9, p) for p in (0.2, 0.5, 0.8)]
        assert payload["probs"] == pytest.approx([v / sum(likes) for v in likes])

    def test_update_prior_file(self, capsys, write_csv):
        """A prior table can be read from CSV."""
        prior = write_csv("prior.csv", "point_1,prob\n0.3,0.5\n0.6,0.5\n")
        lines = run_lines(capsys, ["discrete", "update", "--prior", str(prior), "--y", "1", "--n", "1", "--seed", "1"])
        assert lines[0] == "point_1,prob,seed"
        assert len(lines) == 3

    def test_update_needs_prior(self, capsys):
        """Without points or a table the command is a usage error."""
        assert main(["discrete", "update", "--y", "1", "--n", "2"]) == EXIT_USAGE

    def test_grid2p_summary_and_table(self, capsys):
        """JSON gives the summary; CSV gives the posterior table."""
        argv = [
            "discrete", "grid2p", "--p1-values", "0.2,0.5,0.8", "--diagonal-mass", "0.5",
            "--y1", "2", "--n1", "10", "--y2", "8", "--n2", "10", "--seed", "1",
        ]
        payload = run_json(capsys, argv)
        assert payload["prob_p1_smaller"] > 0.5
        assert payload["mean_p1"] < payload["mean_p2"]
        lines = run_lines(capsys, [*argv, "--format", "csv"])
        assert lines[0] == "point_1,point_2,prob,seed"
        assert len(lines) == 10


class TestSamplerCommands:
    """Tests for MCMC, model and regression commands."""

    def test_gibbs_normal_csv(self, capsys, write_csv, normal_sample):
        """Draws after burn-in are written with the seed."""
        data = write_csv("y.csv", "y\n" + "\n".join(f"{v:.6f}" for v in normal_sample) + "\n")
        lines = run_lines(
            capsys,
            ["mcmc", "gibbs-normal", "--data", str(data), "--iters", "500", "--burn-in", "50", "--seed", "8"],
        )
        assert lines[0] == "draw_index,mu,sigma2,seed"
        assert len(lines) == 451

    def test_metropolis_json(self, capsys):
        """Metropolis on Beta(5, 9) reports acceptance and ESS."""
        payload = run_json(
            capsys,
            [
                "mcmc", "metropolis", "--target", "beta", "--params", "5,9", "--init", "0.4",
                "--scale", "0.2", "--iters", "2000", "--burn-in", "200", "--seed", "4", "--format", "json",
            ],
        )
        assert payload["n_draws"] == 1800
        assert 0.0 < payload["acceptance_rate"] < 1.0
        assert set(payload["ess"]) == {"theta"}

    def test_metropolis_tuned(self, capsys):
        """Tuning records the pilot rounds."""
        payload = run_json(
            capsys,
            [
                "mcmc", "metropolis", "--target", "normal", "--params", "0,1", "--init", "0",
                "--scale", "50", "--tune", "--iters", "1000", "--seed", "2", "--format", "json",
            ],
        )
        assert payload["tuning"]["rounds"]
        assert payload["scale"][0] < 50

    def test_model_run(self, capsys):
        """A script with a --set constant is compiled and sampled."""
        lines = run_lines(
            capsys,
            ["model", "run", str(MODELS / "beta_binomial.bmodel"), "--set", "y=4", "--iters", "1000", "--seed", "2"],
        )
        assert lines[0] == "draw_index,p,seed"
        assert len(lines) == 901

    def test_model_run_with_csv_arrays(self, capsys, write_csv):
        """CSV columns become data arrays for loop bodies."""
        data = write_csv("y.csv", "y\n4.1\n5.6\n3.9\n")
        payload = run_json(
            capsys,
            [
                "model", "run", str(MODELS / "normal_loop.bmodel"), "--data", str(data), "--set", "N=3",
                "--iters", "1000", "--seed", "3", "--format", "json",
            ],
        )
        assert payload["n_draws"] == 900
        assert set(payload["ess"]) == {"mu", "sigma"}
        assert set(payload["node_acceptance"]) == {"mu", "sigma"}
        assert payload["seed"] == 3

    def test_model_syntax_error(self, capsys):
        """Invalid scripts are data errors."""
        assert main(["model", "run", str(MODELS / "missing_comma.bmodel"), "--seed", "1"]) == EXIT_DATA

    def test_hier_props(self, capsys, counts_csv):
        """Hierarchical proportions run from a counts file."""
        lines = run_lines(
            capsys, ["hier", "props", "--data", str(counts_csv), "--iters", "1000", "--seed", "5"]
        )
        assert len(lines) == 901
        assert lines[0].startswith("draw_index,")

    def test_hier_means(self, capsys, write_csv):
        """Hierarchical means report group and hyperparameter summaries."""
        data = write_csv("means.csv", "group,ybar,n\nA,1.2,10\nB,0.4,12\nC,2.1,8\nD,1.0,15\n")
        payload = run_json(
            capsys,
            [
                "hier", "means", "--data", str(data), "--sigma", "1", "--iters", "1000", "--seed", "5",
                "--format", "json",
            ],
        )
        assert payload["n_draws"] == 900
        assert set(payload["summary"]) == {"mu_1", "mu_2", "mu_3", "mu_4", "tau_mean", "tau_sd"}
        assert 0.0 < payload["acceptance_rate"] < 1.0

    def test_reg_linear(self, capsys, regression_csv):
        """Linear regression writes one row per draw."""
        lines = run_lines(
            capsys, ["reg", "linear", "--data", str(regression_csv), "--draws", "200", "--seed", "6"]
        )
        assert lines[0] == "draw_index,beta_1,beta_2,sigma,seed"
        assert len(lines) == 201

    def test_reg_linear_functional(self, capsys, regression_csv):
        """A functional replaces the coefficient draws."""
        lines = run_lines(
            capsys,
            [
                "reg", "linear", "--data", str(regression_csv), "--draws", "100",
                "--functional", "standardized_effect", "--seed", "6",
            ],
        )
        assert len(lines) == 101

    def test_reg_logistic(self, capsys, write_csv):
        """Logistic regression on overlapping 0/1 data."""
        data = write_csv("binary.csv", "y,x\n0,1\n0,2\n1,3\n0,4\n1,5\n0,6\n1,7\n1,8\n")
        payload = run_json(
            capsys,
            [
                "reg", "logistic", "--data", str(data), "--iters", "2000", "--seed", "7",
                "--format", "json",
            ],
        )
        assert payload["n_draws"] == 1800
        assert set(payload["ess"]) == {"beta_1", "beta_2"}
        assert payload["summary"]["beta_2"]["mean"] > 0

    def test_reg_logistic_needs_binary(self, capsys, regression_csv):
        """A non-binary response is a data error."""
        assert main(["reg", "logistic", "--data", str(regression_csv), "--seed", "1"]) == EXIT_DATA


class TestEvalCommands:
    """Tests for model comparison commands."""

    def test_bayes_factor(self, capsys):
        """Point masses at 0.5 and 0.7 with 7 of 10."""
        payload = run_json(
            capsys,
            ["eval", "bf", "--model1", "point:0.5", "--model2", "point:0.7", "--y", "7", "--n", "10", "--seed", "1"],
        )
        assert payload["bayes_factor"] == pytest.approx(0.5**10 / (0.7**7 * 0.3**3), rel=1e-10)
        assert payload["model_1"] == "point:0.5"

    def test_bad_model_spec(self, capsys):
        """Unknown model kinds are usage errors."""
        argv = ["eval", "bf", "--model1", "cauchy:0,1", "--model2", "beta:1,1", "--y", "1", "--n", "2"]
        assert main(argv) == EXIT_USAGE
        assert "cauchy" in capsys.readouterr().err

    def test_ppc_binomial(self, capsys, counts_csv):
        """Binomial checks read y,n columns."""
        payload = run_json(
            capsys,
            ["eval", "ppc", "--data", str(counts_csv), "--test", "variance", "--replicates", "200", "--seed", "3"],
        )
        assert 0.0 < payload["tail_prob"] <= 1.0
        assert len(payload["t_replicates"]) == 200
        assert list(payload) == ["t_observed", "t_replicates", "tail_prob", "seed"]

    def test_ppc_threads_agree(self, capsys, counts_csv):
        """The thread count does not change the output."""
        argv = ["eval", "ppc", "--data", str(counts_csv), "--replicates", "150", "--seed", "3"]
        single = run_json(capsys, argv)
        pooled = run_json(capsys, [*argv, "--threads", "3"])
        assert single == pooled

    def test_sensitivity(self, capsys):
        """Rows come back base first with the seed alongside."""
        payload = run_json(
            capsys,
            [
                "eval", "sensitivity", "--model", "beta:1,1", "--perturb", "beta:2,2",
                "--y", "4", "--n", "12", "--seed", "9",
            ],
        )
        assert payload["seed"] == 9
        assert [row["label"] for row in payload["rows"]] == ["beta:1,1", "beta:2,2"]
        assert payload["rows"][0]["summary"] == pytest.approx(5 / 14)


class TestMain:
    """Tests for exit codes, seeds and output handling."""

    def test_no_arguments(self, capsys):
        """An empty command line prints usage."""
        assert main([]) == EXIT_USAGE
        assert "usage:" in capsys.readouterr().err

    def test_unknown_command(self, capsys):
        """Unknown commands are usage errors."""
        assert main(["bogus"]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err

    def test_missing_required_option(self, capsys):
        """Required options are enforced."""
        assert main(["beta", "update", "--a", "1"]) == EXIT_USAGE

    def test_invalid_number(self, capsys):
        """Non-numeric values are rejected by the parser."""
        assert main(["beta", "update", "--a", "one", "--b", "1", "--y", "1", "--n", "2"]) == EXIT_USAGE
        assert "expected a number" in capsys.readouterr().err

    def test_data_error(self, capsys):
        """Impossible data exits with the data code."""
        assert main(["beta", "update", "--a", "1", "--b", "1", "--y", "5", "--n", "3"]) == EXIT_DATA

    def test_missing_file(self, capsys, tmp_path):
        """Unreadable inputs exit with the data code."""
        argv = ["mcmc", "gibbs-normal", "--data", str(tmp_path / "absent.csv"), "--iters", "100"]
        assert main(argv) == EXIT_DATA

    def test_burn_in_not_below_iters(self, capsys, write_csv):
        """Inconsistent chain settings are usage errors."""
        data = write_csv("y.csv", "y\n1\n2\n3\n")
        argv = ["mcmc", "gibbs-normal", "--data", str(data), "--iters", "100", "--burn-in", "100"]
        assert main(argv) == EXIT_USAGE

    def test_numerical_failure(self, capsys):
        """Solver failures exit with the numerical code."""
        argv = ["beta", "select", "--q1", "0.01", "--x1", "0.5", "--q2", "0.99", "--x2", "0.500001"]
        assert main(argv) == EXIT_NUMERICAL

    def test_seed_from_environment(self, capsys, monkeypatch):
        """The environment seed is echoed in the output."""
        monkeypatch.setenv(SEED_ENV_VAR, "77")
        payload = run_json(capsys, ["beta", "update", "--a", "1", "--b", "1", "--y", "0", "--n", "0"])
        assert payload["seed"] == 77

    def test_invalid_environment_seed(self, capsys, monkeypatch):
        """A malformed environment seed is a usage error."""
        monkeypatch.setenv(SEED_ENV_VAR, "soon")
        assert main(["beta", "update", "--a", "1", "--b", "1", "--y", "0", "--n", "0"]) == EXIT_USAGE

    def test_generated_seed_reproduces(self, capsys):
        """Rerunning with the echoed seed repeats the result."""
        argv = ["beta", "interval", "--a", "5", "--b", "9", "--method", "simulation", "--sim-size", "2000"]
        first = run_json(capsys, argv)
        again = run_json(capsys, [*argv, "--seed", str(first["seed"])])
        assert again == first

    def test_output_file(self, capsys, tmp_path):
        """--output writes the file instead of stdout."""
        out = tmp_path / "post.json"
        assert main(["beta", "update", "--a", "2", "--b", "2", "--y", "1", "--n", "4", "--seed", "1", "--output", str(out)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text(encoding="utf-8"))["a_post"] == 3.0

    def test_version(self, capsys):
        """--version prints the package version."""
        assert main(["--version"]) == EXIT_OK
        assert VERSION in capsys.readouterr().out

    @pytest.mark.parametrize(
        ("argv", "flags"),
        [
            ([], ["discrete", "beta", "normal", "mcmc", "model", "hier", "reg", "eval"]),
            (["beta", "update"], ["--a", "--b", "--y", "--n", "--seed", "--format", "--output"]),
            (["mcmc", "metropolis"], ["--target", "--params", "--init", "--tune", "--iters", "--burn-in"]),
            (["eval", "ppc"], ["--data", "--test", "--replicates", "--threads"]),
        ],
    )
    def test_help_lists_flags(self, capsys, argv, flags):
        """Help pages list every command and option."""
        assert main([*argv, "--help"]) == EXIT_OK
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text

    def test_parser_builds(self):
        """The argument tree is built without side effects."""
        args = build_parser().parse_args(["normal", "predict", "--mean", "0", "--sd", "0", "--sigma", "1"])
        assert (args.topic, args.action) == ("normal", "predict")
