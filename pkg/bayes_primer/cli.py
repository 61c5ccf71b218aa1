"""Command-line interface: argument tree, dispatch and exit codes."""
from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import logging
import math
import os
from pathlib import Path
import sys
from typing import Any, NoReturn

import numpy as np
import pandas as pd

from .config import RunConfig, build_run_config
from .conjugate import (
    BetaBinomialState,
    IntervalMethod,
    NormalMeanState,
    beta_binomial_predictive,
    beta_select,
    beta_update,
    credible_interval,
    normal_predictive,
    normal_update,
)
from .const import (
    DEFAULT_HIER_PROPORTION_SCALE,
    DEFAULT_ITERATIONS,
    DEFAULT_LEVEL,
    DEFAULT_LOGISTIC_PRIOR_SD,
    DEFAULT_MAX_LAG,
    DEFAULT_PROPOSAL_SCALE,
    DEFAULT_REPLICATES,
    DEFAULT_SIM_SIZE,
    DOMAIN,
    EXIT_DATA,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    FORMAT_CSV,
    OUTPUT_FORMATS,
    PROG_NAME,
    SEED_ENV_VAR,
    VERSION,
)
from .discrete import (
    BinomialLikelihood,
    DiscreteTable,
    LikelihoodSpec,
    NormalLikelihood,
    bayes_update,
    make_grid_prior,
    summarize_grid,
    two_proportion_update,
)
from .distributions import Distribution, Family, make_rng
from .errors import BayesPrimerError, DataError, SettingsError, UsageError
from .evaluation import (
    SUMMARIES,
    TEST_FUNCTIONS,
    BetaModel,
    BinomialSampling,
    DiscreteModel,
    ModelSpec,
    NormalModel,
    NormalSampling,
    bayes_factor,
    log_marginal_likelihood,
    posterior_predictive_check,
    sensitivity_scan,
)
from .graph import compile_model, sample_graph
from .language import parse_file
from .mcmc import gibbs_normal, metropolis_rw, tune_scale
from .models import (
    FunctionalKind,
    fit_hierarchical_means,
    fit_hierarchical_proportions,
    fit_logistic,
    posterior_functional,
    sim_linear_regression,
)
from .serialization import (
    COUNT,
    emit,
    ingest_csv,
    load_model_data,
    read_group_counts,
    read_group_means,
    read_observations,
    read_regression,
    read_table,
)

_LOGGER = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace, RunConfig], Any]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}", self.format_usage())


# Argument types


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return value


def _count(text: str) -> int:
    """Nonnegative whole number; scientific notation such as 1e4 is accepted."""
    try:
        value = int(text)
    except ValueError:
        as_float = _number(text)
        if not as_float.is_integer():
            raise argparse.ArgumentTypeError(f"expected a whole number, got {text!r}") from None
        value = int(as_float)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return value


def _number_list(text: str) -> list[float]:
    values = [_number(part.strip()) for part in text.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return values


def _name_list(text: str) -> list[str]:
    return [name.strip() for name in text.split(",") if name.strip()]


def _assignment(text: str) -> tuple[str, float | list[float]]:
    """NAME=VALUE or NAME=V1,V2,... for model constants."""
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    values = _number_list(value)
    return name.strip(), values if "," in value else values[0]


def _model_spec(text: str) -> ModelSpec:
    """beta:A,B | normal:M0,S0 | point:P | grid:P1,P2,..."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(
            f"expected KIND:PARAMS (beta, normal, point or grid), got {text!r}"
        )
    values = _number_list(rest)
    try:
        if kind == "beta" and len(values) == 2:
            return BetaModel(*values, label=text)
        if kind == "normal" and len(values) == 2:
            return NormalModel(*values, label=text)
        if kind == "point" and len(values) == 1:
            return DiscreteModel(DiscreteTable.uniform(values), label=text)
        if kind == "grid":
            return DiscreteModel(DiscreteTable.uniform(values), label=text)
    except DataError as err:
        raise argparse.ArgumentTypeError(f"{text}: {err}") from err
    raise argparse.ArgumentTypeError(f"cannot read model {text!r}")


# Shared option groups


def _run_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("run options")
    group.add_argument(
        "--seed", type=_count, help=f"random seed (default: ${SEED_ENV_VAR}, else generated)"
    )
    group.add_argument(
        "--format", choices=OUTPUT_FORMATS, help="output format (default: csv for draws and tables)"
    )
    group.add_argument("--output", type=Path, metavar="PATH", help="write here instead of stdout")
    group.add_argument("--threads", type=_count, default=1, help="worker threads (default: 1)")
    group.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug"
    )
    return common


def _add_chain_options(parser: argparse.ArgumentParser, iters: int = DEFAULT_ITERATIONS) -> None:
    group = parser.add_argument_group("chain options")
    group.add_argument("--iters", type=_count, default=iters, help=f"iterations (default: {iters})")
    group.add_argument("--burn-in", type=_count, help="discarded iterations (default: a tenth)")
    group.add_argument(
        "--max-lag", type=_count, default=DEFAULT_MAX_LAG, help="autocorrelation lags reported"
    )


def _add_likelihood_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data (binomial: --y --n; normal: --ybar --n --sigma)")
    group.add_argument("--y", type=_count, help="successes")
    group.add_argument("--n", type=_count, help="trials, or sample size with --ybar")
    group.add_argument("--ybar", type=_number, help="sample mean")
    group.add_argument("--sigma", type=_number, help="known sampling sd")


def _likelihood(args: argparse.Namespace) -> LikelihoodSpec:
    if args.n is None:
        raise UsageError("--n is required")
    if args.ybar is not None:
        if args.y is not None:
            raise UsageError("give --y or --ybar, not both")
        if args.sigma is None:
            raise UsageError("--sigma is required with --ybar")
        return NormalLikelihood(args.ybar, args.n, args.sigma)
    if args.y is None:
        raise UsageError("give --y for binomial data or --ybar for normal data")
    return BinomialLikelihood(args.y, args.n)


# Handlers


def _discrete_update(args: argparse.Namespace, cfg: RunConfig) -> DiscreteTable:
    like = _likelihood(args)
    if args.prior is not None:
        prior = read_table(args.prior)
    elif args.points is not None:
        weights = args.weights or [1.0] * len(args.points)
        if len(weights) != len(args.points):
            raise UsageError(f"{len(weights)} weights for {len(args.points)} points")
        label = ("mu",) if isinstance(like, NormalLikelihood) else ("p",)
        prior = DiscreteTable.from_weights(args.points, weights, label)
    else:
        raise UsageError("give --points or --prior")
    return bayes_update(prior, like)


def _discrete_grid2p(args: argparse.Namespace, cfg: RunConfig) -> Any:
    p2_values = args.p2_values or args.p1_values
    prior = make_grid_prior(args.p1_values, p2_values, args.diagonal_mass)
    posterior = two_proportion_update(prior, (args.y1, args.n1, args.y2, args.n2))
    if cfg.output_format == FORMAT_CSV:
        return posterior
    return summarize_grid(posterior)


def _beta_update(args: argparse.Namespace, cfg: RunConfig) -> dict[str, float]:
    a_post, b_post = beta_update(BetaBinomialState(args.a, args.b, args.y, args.n)).params
    return {"a_post": a_post, "b_post": b_post}


def _beta_select(args: argparse.Namespace, cfg: RunConfig) -> dict[str, float]:
    a, b = beta_select((args.q1, args.x1), (args.q2, args.x2)).params
    return {"a": a, "b": b}


def _beta_interval(args: argparse.Namespace, cfg: RunConfig) -> Any:
    return credible_interval(
        Distribution.beta(args.a, args.b), args.level, args.method, args.sim_size, cfg.seed
    )


def _beta_predict(args: argparse.Namespace, cfg: RunConfig) -> pd.DataFrame:
    pmf = beta_binomial_predictive(Distribution.beta(args.a, args.b), args.m)
    return pd.DataFrame({"successes": list(pmf), "prob": list(pmf.values())})


def _normal_update(args: argparse.Namespace, cfg: RunConfig) -> Distribution:
    return normal_update(NormalMeanState(args.m0, args.s0, args.ybar, args.n, args.sigma))


def _normal_predict(args: argparse.Namespace, cfg: RunConfig) -> Distribution:
    return normal_predictive((args.mean, args.sd), args.sigma)


def _mcmc_gibbs_normal(args: argparse.Namespace, cfg: RunConfig) -> Any:
    data = read_observations(args.data, args.column)
    init = None
    if args.init_mu is not None or args.init_sigma2 is not None:
        if args.init_mu is None or args.init_sigma2 is None:
            raise UsageError("--init-mu and --init-sigma2 go together")
        init = (args.init_mu, args.init_sigma2)
    return gibbs_normal(data, cfg.iters, cfg.burn_in, init, cfg.seed, args.max_lag)


def _mcmc_metropolis(args: argparse.Namespace, cfg: RunConfig) -> Any:
    target = Distribution(Family(args.target), tuple(args.params))

    def log_target(theta: np.ndarray) -> float:
        return target.log_density(float(theta[0]))

    rng = make_rng(cfg.seed)
    scale: Any = args.scale
    tuning = None
    if args.tune:
        scale, tuning = tune_scale(log_target, args.init, scale, rng)
    return metropolis_rw(
        log_target,
        scale,
        cfg.iters,
        cfg.burn_in,
        args.init,
        rng,
        names=(args.name,),
        max_lag=args.max_lag,
        tuning=tuning,
    )


def _model_run(args: argparse.Namespace, cfg: RunConfig) -> Any:
    ast = parse_file(args.script)
    data: dict[str, Any] = load_model_data(args.data) if args.data is not None else {}
    for name, value in args.set or ():
        data[name] = value
    graph = compile_model(ast, data)
    _LOGGER.info("Compiled %s: unknowns %s", args.script, ", ".join(graph.unknowns))
    return sample_graph(
        graph,
        cfg.iters,
        cfg.burn_in,
        cfg.seed,
        scales=args.scale,
        tune=args.tune,
        max_lag=args.max_lag,
    )


def _hier_props(args: argparse.Namespace, cfg: RunConfig) -> Any:
    scale = args.scale or DEFAULT_HIER_PROPORTION_SCALE
    return fit_hierarchical_proportions(
        read_group_counts(args.data), cfg.iters, cfg.burn_in, cfg.seed, scale, args.max_lag
    )


def _hier_means(args: argparse.Namespace, cfg: RunConfig) -> Any:
    return fit_hierarchical_means(
        read_group_means(args.data, args.sigma),
        cfg.iters,
        cfg.burn_in,
        cfg.seed,
        args.scale,
        args.max_lag,
    )


def _reg_linear(args: argparse.Namespace, cfg: RunConfig) -> Any:
    data = read_regression(args.data, args.response, args.covariates)
    draws = sim_linear_regression(data, args.draws, cfg.seed)
    if args.functional is None:
        return draws
    return posterior_functional(draws, args.functional, q=args.q, effect=args.effect)


def _reg_logistic(args: argparse.Namespace, cfg: RunConfig) -> Any:
    data = read_regression(args.data, args.response, args.covariates)
    if not np.all(np.isin(data.y, (0.0, 1.0))):
        raise DataError(f"{args.data}: logistic response {args.response} must be 0 or 1")
    return fit_logistic(
        data, cfg.iters, cfg.burn_in, cfg.seed, args.prior_sd, args.scale, args.max_lag
    )


def _eval_bf(args: argparse.Namespace, cfg: RunConfig) -> dict[str, Any]:
    like = _likelihood(args)
    return {
        "model_1": args.model1.label,
        "model_2": args.model2.label,
        "log_marginal_1": log_marginal_likelihood(args.model1, like),
        "log_marginal_2": log_marginal_likelihood(args.model2, like),
        "bayes_factor": bayes_factor(args.model1, args.model2, like),
    }


def _eval_ppc(args: argparse.Namespace, cfg: RunConfig) -> Any:
    if args.sigma is None:
        table = ingest_csv(args.data, {"y": COUNT, "n": COUNT})
        y, n = table.array("y"), table.array("n")
        if np.any(y > n):
            raise DataError(f"{args.data}: every row needs y <= n")
        posterior = beta_update(
            BetaBinomialState(args.a, args.b, int(y.sum()), int(n.sum()))
        )
        sampling: Any = BinomialSampling(tuple(int(v) for v in n))
        observed = y
    else:
        observed = read_observations(args.data, args.column)
        posterior = normal_update(
            NormalMeanState(args.m0, args.s0, float(observed.mean()), observed.size, args.sigma)
        )
        sampling = NormalSampling(observed.size, args.sigma)
    return posterior_predictive_check(
        posterior, sampling, args.test, observed, args.replicates, cfg.seed, cfg.threads
    )


def _eval_sensitivity(args: argparse.Namespace, cfg: RunConfig) -> Any:
    return sensitivity_scan(args.model, args.perturb or [], _likelihood(args), args.summary)


# Parser tree


def _subcommand(
    group: Any, name: str, handler: Handler, help_text: str, common: argparse.ArgumentParser
) -> argparse.ArgumentParser:
    parser = group.add_parser(name, help=help_text, description=help_text, parents=[common])
    parser.set_defaults(handler=handler)
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Full argument tree."""
    common = _run_options()
    parser = _Parser(
        prog=PROG_NAME,
        description="Bayesian inference from the command line.",
        epilog=f"Seeds come from --seed, then ${SEED_ENV_VAR}, else are generated and echoed.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    topics = parser.add_subparsers(dest="topic", metavar="COMMAND", required=True)

    # discrete
    discrete = topics.add_parser("discrete", help="discrete priors and grids")
    actions = discrete.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "update", _discrete_update, "update a discrete prior", common)
    cmd.add_argument("--points", type=_number_list, help="support points, comma separated")
    cmd.add_argument("--weights", type=_number_list, help="prior weights (default: uniform)")
    cmd.add_argument("--prior", type=Path, help="prior table CSV (point_1,prob)")
    _add_likelihood_options(cmd)
    cmd = _subcommand(actions, "grid2p", _discrete_grid2p, "two-proportion grid posterior", common)
    cmd.add_argument("--p1-values", type=_number_list, required=True, help="grid values for p1")
    cmd.add_argument("--p2-values", type=_number_list, help="grid values for p2 (default: p1's)")
    cmd.add_argument(
        "--diagonal-mass", type=_number, default=0.0, help="prior mass on p1 = p2 (default: 0)"
    )
    for flag in ("--y1", "--n1", "--y2", "--n2"):
        cmd.add_argument(flag, type=_count, required=True)

    # beta
    beta = topics.add_parser("beta", help="beta-binomial conjugate analysis")
    actions = beta.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "update", _beta_update, "posterior beta parameters", common)
    for flag in ("--a", "--b"):
        cmd.add_argument(flag, type=_number, required=True, help="prior parameter")
    cmd.add_argument("--y", type=_count, required=True, help="successes")
    cmd.add_argument("--n", type=_count, required=True, help="trials")
    cmd = _subcommand(actions, "select", _beta_select, "beta prior from two percentiles", common)
    for flag, help_text in (
        ("--q1", "lower probability"),
        ("--x1", "lower percentile"),
        ("--q2", "upper probability"),
        ("--x2", "upper percentile"),
    ):
        cmd.add_argument(flag, type=_number, required=True, help=help_text)
    cmd = _subcommand(actions, "interval", _beta_interval, "equal-tail credible interval", common)
    for flag in ("--a", "--b"):
        cmd.add_argument(flag, type=_number, required=True)
    cmd.add_argument("--level", type=_number, default=DEFAULT_LEVEL, help="credible level")
    cmd.add_argument(
        "--method", choices=[m.value for m in IntervalMethod], default=IntervalMethod.EXACT.value
    )
    cmd.add_argument("--sim-size", type=_count, default=DEFAULT_SIM_SIZE, help="draws when simulating")
    cmd = _subcommand(actions, "predict", _beta_predict, "beta-binomial predictive", common)
    for flag in ("--a", "--b"):
        cmd.add_argument(flag, type=_number, required=True)
    cmd.add_argument("--m", type=_count, required=True, help="future trials")

    # normal
    normal = topics.add_parser("normal", help="normal mean with known sd")
    actions = normal.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "update", _normal_update, "posterior of a normal mean", common)
    cmd.add_argument("--m0", type=_number, required=True, help="prior mean")
    cmd.add_argument("--s0", type=_number, required=True, help="prior sd")
    cmd.add_argument("--ybar", type=_number, required=True, help="sample mean")
    cmd.add_argument("--n", type=_count, required=True, help="sample size")
    cmd.add_argument("--sigma", type=_number, required=True, help="known sampling sd")
    cmd = _subcommand(actions, "predict", _normal_predict, "predictive of one observation", common)
    cmd.add_argument("--mean", type=_number, required=True, help="posterior mean")
    cmd.add_argument("--sd", type=_number, required=True, help="posterior sd (0 for a known mean)")
    cmd.add_argument("--sigma", type=_number, required=True, help="known sampling sd")

    # mcmc
    mcmc = topics.add_parser("mcmc", help="Markov chain samplers")
    actions = mcmc.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "gibbs-normal", _mcmc_gibbs_normal, "Gibbs for normal data", common)
    cmd.add_argument("--data", type=Path, required=True, help="CSV with the observations")
    cmd.add_argument("--column", default="y", help="observation column (default: y)")
    cmd.add_argument("--init-mu", type=_number)
    cmd.add_argument("--init-sigma2", type=_number)
    _add_chain_options(cmd)
    cmd = _subcommand(actions, "metropolis", _mcmc_metropolis, "random-walk Metropolis", common)
    cmd.add_argument(
        "--target",
        choices=[f.value for f in Family if f is not Family.BINOMIAL],
        required=True,
        help="target family",
    )
    cmd.add_argument("--params", type=_number_list, required=True, help="target parameters")
    cmd.add_argument("--init", type=_number, required=True, help="starting value")
    cmd.add_argument("--scale", type=_number, default=DEFAULT_PROPOSAL_SCALE, help="proposal sd")
    cmd.add_argument("--name", default="theta", help="draw column name")
    cmd.add_argument("--tune", action="store_true", help="pilot-tune the proposal scale")
    _add_chain_options(cmd)

    # model
    model = topics.add_parser("model", help="model scripts")
    actions = model.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "run", _model_run, "compile and sample a model script", common)
    cmd.add_argument("script", type=Path, help="model script (.bmodel)")
    cmd.add_argument("--data", type=Path, help="data as JSON object or CSV columns")
    cmd.add_argument(
        "--set", type=_assignment, action="append", metavar="NAME=VALUE", help="data constant"
    )
    cmd.add_argument("--scale", type=_number, help="proposal sd on the transformed scale")
    cmd.add_argument("--tune", action="store_true", help="pilot-tune the proposal scales")
    _add_chain_options(cmd)

    # hier
    hier = topics.add_parser("hier", help="hierarchical models")
    actions = hier.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "props", _hier_props, "exchangeable proportions", common)
    cmd.add_argument("--data", type=Path, required=True, help="CSV with group,y,n")
    cmd.add_argument("--scale", type=_number_list, help="proposal sds for (logit eta, log K)")
    _add_chain_options(cmd)
    cmd = _subcommand(actions, "means", _hier_means, "exchangeable normal means", common)
    cmd.add_argument("--data", type=Path, required=True, help="CSV with group,ybar,n")
    cmd.add_argument("--sigma", type=_number, required=True, help="known sampling sd")
    cmd.add_argument("--scale", type=_number_list, help="proposal sds for (tau_mean, log tau_sd)")
    _add_chain_options(cmd)

    # reg
    reg = topics.add_parser("reg", help="regression")
    actions = reg.add_subparsers(dest="action", metavar="ACTION", required=True)
    for name, handler, help_text in (
        ("linear", _reg_linear, "linear regression, noninformative prior"),
        ("logistic", _reg_logistic, "logistic regression by Metropolis"),
    ):
        cmd = _subcommand(actions, name, handler, help_text, common)
        cmd.add_argument("--data", type=Path, required=True, help="CSV data file")
        cmd.add_argument("--response", default="y", help="response column (default: y)")
        cmd.add_argument(
            "--covariates",
            type=_name_list,
            help="covariate columns (default: all others)",
        )
        if name == "linear":
            cmd.add_argument("--draws", type=_count, default=DEFAULT_SIM_SIZE, help="draw count")
            cmd.add_argument(
                "--functional", choices=[k.value for k in FunctionalKind], help="derived quantity"
            )
            cmd.add_argument("--q", type=_number, help="percentile level for normal_percentile")
            cmd.add_argument("--effect", default="beta_2", help="coefficient for the effect size")
        else:
            cmd.add_argument("--prior-sd", type=_number, default=DEFAULT_LOGISTIC_PRIOR_SD)
            cmd.add_argument("--scale", type=_number, help="proposal sd (default: from curvature)")
            _add_chain_options(cmd)

    # eval
    evaluate = topics.add_parser("eval", help="model comparison and criticism")
    actions = evaluate.add_subparsers(dest="action", metavar="ACTION", required=True)
    cmd = _subcommand(actions, "bf", _eval_bf, "Bayes factor of two priors", common)
    cmd.add_argument("--model1", type=_model_spec, required=True, help="e.g. beta:1,1 or point:0.5")
    cmd.add_argument("--model2", type=_model_spec, required=True, help="e.g. grid:0.3,0.5,0.7")
    _add_likelihood_options(cmd)
    cmd = _subcommand(actions, "ppc", _eval_ppc, "posterior predictive check", common)
    cmd.add_argument("--data", type=Path, required=True, help="CSV with y,n (or a column with --sigma)")
    cmd.add_argument("--a", type=_number, default=1.0, help="beta prior a (default: 1)")
    cmd.add_argument("--b", type=_number, default=1.0, help="beta prior b (default: 1)")
    cmd.add_argument("--sigma", type=_number, help="known sd; switches to normal data")
    cmd.add_argument("--column", default="y", help="observation column for normal data")
    cmd.add_argument("--m0", type=_number, default=0.0, help="normal prior mean")
    cmd.add_argument("--s0", type=_number, default=1e3, help="normal prior sd")
    cmd.add_argument("--test", choices=sorted(TEST_FUNCTIONS), default="mean")
    cmd.add_argument("--replicates", type=_count, default=DEFAULT_REPLICATES)
    cmd = _subcommand(actions, "sensitivity", _eval_sensitivity, "prior sensitivity scan", common)
    cmd.add_argument("--model", type=_model_spec, required=True, help="base prior")
    cmd.add_argument(
        "--perturb", type=_model_spec, action="append", help="alternative prior (repeatable)"
    )
    cmd.add_argument("--summary", choices=sorted(SUMMARIES), default="mean")
    _add_likelihood_options(cmd)
    return parser


def _settings(args: argparse.Namespace) -> dict[str, Any]:
    inputs = [
        value
        for key in ("data", "prior", "script")
        if (value := getattr(args, key, None)) is not None
    ]
    return {
        "command": f"{args.topic} {args.action}",
        "seed": args.seed,
        "format": args.format,
        "output": args.output,
        "threads": args.threads,
        "verbose": args.verbose,
        "iters": getattr(args, "iters", None),
        "burn_in": getattr(args, "burn_in", None),
        "inputs": inputs,
    }


def _configure_logging(verbose: int) -> None:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    level = logging.DEBUG if verbose >= 2 else logging.INFO if verbose == 1 else logging.WARNING
    logging.getLogger(DOMAIN).setLevel(level)


def _exit_code(err: BaseException) -> int:
    if isinstance(err, (UsageError, SettingsError)):
        return EXIT_USAGE
    if isinstance(err, (DataError, OSError)):
        return EXIT_DATA
    return EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command.

    Returns:
        0 on success, 1 for usage errors, 2 for data errors, 3 for numerical failures
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        sys.stderr.write(err.usage or parser.format_usage())
        sys.stderr.write(f"error: {err}\n")
        return EXIT_USAGE
    except SystemExit as err:
        # --help and --version
        return int(err.code or 0)

    _configure_logging(args.verbose)
    try:
        cfg = build_run_config(_settings(args), os.environ)
        _LOGGER.info("Running %s with seed %d", cfg.command, cfg.seed)
        result = args.handler(args, cfg)
        emit(result, cfg.output_format, cfg.output, cfg.seed)
    except (BayesPrimerError, OSError) as err:
        _LOGGER.debug("Command failed", exc_info=True)
        _LOGGER.error("%s", err)
        return _exit_code(err)
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        _LOGGER.debug("Command failed", exc_info=True)
        _LOGGER.error("numerical failure: %s", err)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
