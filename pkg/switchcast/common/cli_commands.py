"""
Command line

Subcommands map one-to-one onto the experiments, plus a generic switch
runner and the self test. Every run validates its settings into a RunConfig,
commits its CSV together with a manifest, and exits with a status from
common.status.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import click

from switchcast import __version__, config
from switchcast.baselines import no_hypercompression_check
from switchcast.common import log_handlers, status
from switchcast.common.error_handlers import handle_error
from switchcast.common.writers import OutputSet
from switchcast.experiments import (
    catchup_table,
    consistency_summary,
    consistency_table,
    histsim_table,
    run_catchup,
    run_consistency,
    run_families,
    run_histsim,
)
from switchcast.models import ALPHABETS, DataValidationError, InvariantViolation, RunConfig, alphabet_size
from switchcast.predictors import parse_family
from switchcast.priors import SwitchPriorConfig, build_prior
from switchcast.selftest import run_selftest
from switchcast.sources import STREAM_HYPERCOMPRESSION, load_sequence, make_rng, parse_density, read_corpus

logger = logging.getLogger(__name__)

RUN_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Flat JSON config file"),
    click.option("--input", type=click.Path(dir_okay=False), help="Input corpus or sequence file"),
    click.option("--orders", help="Markov orders, e.g. 1,2"),
    click.option("--models", help="Strategy families, e.g. markov:1,markov:2"),
    click.option("--alphabet", type=click.Choice(ALPHABETS)),
    click.option("--n", type=int, help="Sample size"),
    click.option("--replicates", type=int),
    click.option("--seed", type=int, help=f"Top-level seed (fallback: ${config.SEED_ENV})"),
    click.option("--seeds", type=int, help="Number of consistency replicates"),
    click.option("--density", help="uniform | linear:a,b | piecewise:d1,...,dm"),
    click.option("--estimators", help="switch,bma,cuberoot,fixed:<k>"),
    click.option("--theta-star", type=float),
    click.option("--transition", help="Markov source P(1|0),P(1|1)"),
    click.option("--out", type=click.Path(file_okay=False), help="Output directory"),
    click.option("--stride", type=int),
    click.option("--workers", type=int),
    click.option("--kmax", type=int, help="Largest histogram bin count (histsim only)"),
    click.option("--theta", type=float),
    click.option("--prior-k", help="harmonic | uniform | zeta:<alpha>"),
    click.option("--prior-t", help="harmonic | geometric:<rho> | zeta:<alpha>"),
    click.option("--schedule", help="constant | growth:<tau>"),
    click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False)),
]


def run_options(function):
    """Attaches every run flag to a subcommand"""
    for option in reversed(RUN_OPTIONS):
        function = option(function)
    return function


######################################################################
#  R U N N E R S
######################################################################
def _prior(run: RunConfig, kmax: int) -> SwitchPriorConfig:
    return build_prior(kmax, run.theta, run.prior_k, run.prior_t, run.schedule)


def _run_catchup(run: RunConfig, outputs: OutputSet):
    corpus = read_corpus(run.input)
    rows = run_catchup(corpus, run.orders, _prior(run, len(run.orders)), run.stride)
    final = rows[-1]
    logger.info("n=%d: switch %.1f bits, BMA %.1f bits, selected order %s",
                final.n, final.codelen_bits_sw, final.codelen_bits_bma, final.selected)
    outputs.add_csv("catchup.csv", *catchup_table(rows))


def _run_switch(run: RunConfig, outputs: OutputSet):
    families = [parse_family(spec, alphabet_size(run.alphabet)) for spec in run.models]
    data = load_sequence(run.input, run.alphabet)
    rows = run_families(data, families, _prior(run, len(families)), run.stride)
    outputs.add_csv("switch.csv", *catchup_table(rows))


def _run_histsim(run: RunConfig, outputs: OutputSet):
    density = parse_density(run.density)
    prior = _prior(run, run.resolved_kmax())
    curves = run_histsim(density, run.n, run.replicates, run.estimators, prior, run.seed, run.workers)
    for curve in curves:
        logger.info("%s: %.2f +/- %.2f bits at n=%d", curve.estimator, curve.mean[-1], curve.se[-1], curve.grid[-1])
    outputs.add_csv("histsim.csv", *histsim_table(curves))


def _run_consistency(run: RunConfig, outputs: OutputSet):
    families = [parse_family(spec, 2) for spec in run.models]
    prior = _prior(run, len(families))
    traces = run_consistency(
        run.theta_star, run.n, run.seeds, families, prior, run.seed, run.transition, run.workers
    )
    target = 1 if run.transition is None else len(families)
    summary = consistency_summary(traces, target)
    logger.info("Selected %s at n=%d in %.0f%% of seeds; posterior > 0.9 held in %.0f%%",
                run.models[target - 1], run.n, 100 * summary["selected_final"], 100 * summary["held_last_steps"])
    outputs.add_csv("consistency.csv", *consistency_table(traces))


def _run_selftest(run: RunConfig, outputs: OutputSet):
    report = run_selftest(run.n, run.replicates, run.seed)
    families = [parse_family(spec, 2) for spec in ("markov:0", "markov:1")]
    prior = build_prior(len(families), run.theta)
    rows = report.rows()
    for index, sampler in enumerate(("bma", "switch")):
        rng = make_rng(run.seed, STREAM_HYPERCOMPRESSION, index)
        result = no_hypercompression_check(prior, families, 200, 1000, 20.0, rng, sampler)
        rows.append([f"no hypercompression ({sampler})", str(int(result.passed)), str(int(not result.passed))])
    outputs.add_csv("selftest.csv", ["suite", "passed", "failed"], rows)
    failed = [row for row in rows if int(row[2])]
    for row in failed:
        logger.error("Self-test suite %s: %s checks failed", row[0], row[2])
    if failed:
        raise InvariantViolation(f"{sum(int(row[2]) for row in failed)} self-test checks failed")


RUNNERS: Dict[str, Callable[[RunConfig, OutputSet], None]] = {
    "catchup": _run_catchup,
    "histsim": _run_histsim,
    "consistency": _run_consistency,
    "switch": _run_switch,
    "selftest": _run_selftest,
}


######################################################################
#  E N T R Y   P O I N T S
######################################################################
def parse_and_validate(argv: Sequence[str]) -> RunConfig:
    """Builds a validated RunConfig from `<subcommand> [flags]`"""
    if not argv or argv[0] not in RUNNERS:
        raise DataValidationError(f"Invalid subcommand: {argv[0] if argv else None}")
    command = cli.commands[argv[0]]
    try:
        context = command.make_context(argv[0], list(argv[1:]))
    except click.UsageError as error:
        raise DataValidationError(f"Invalid flags: {error.format_message()}") from error
    flags = dict(context.params)
    config_path = flags.pop("config_path", None)
    return RunConfig.build(argv[0], flags, config_path)


def execute(run: RunConfig) -> int:
    """Runs a validated config and returns the exit status"""
    log_handlers.log_banner(logger, f"switchcast {run.subcommand}")
    try:
        outputs = OutputSet(run.out)
        RUNNERS[run.subcommand](run, outputs)
        outputs.add_manifest(run.serialize())
        outputs.commit()
    except Exception as error:  # pylint: disable=broad-except
        return handle_error(error)
    logger.info("Run complete")
    return status.EX_OK


def _invoke(context: click.Context, subcommand: str, flags: dict):
    log_handlers.init_logging(config.LOGGER_NAME, flags.get("log_level") or config.LOG_LEVEL)
    config_path: Optional[str] = flags.pop("config_path", None)
    try:
        run = RunConfig.build(subcommand, flags, config_path)
    except Exception as error:  # pylint: disable=broad-except
        context.exit(handle_error(error))
    logging.getLogger(config.LOGGER_NAME).setLevel(run.log_level.upper())
    context.exit(execute(run))


@click.group()
@click.version_option(version=__version__, prog_name="switchcast")
def cli():
    """Switch distribution experiments"""


@cli.command("catchup")
@run_options
@click.pass_context
def catchup(context, **flags):
    """Catch-up curve of Markov orders on a text corpus"""
    _invoke(context, "catchup", flags)


@cli.command("histsim")
@run_options
@click.pass_context
def histsim(context, **flags):
    """Cumulative redundancy of histogram estimators"""
    _invoke(context, "histsim", flags)


@cli.command("consistency")
@run_options
@click.pass_context
def consistency(context, **flags):
    """Consistency of switch model selection on binary data"""
    _invoke(context, "consistency", flags)


@cli.command("switch")
@run_options
@click.pass_context
def switch(context, **flags):
    """Switch distribution over configured strategy families"""
    _invoke(context, "switch", flags)


@cli.command("selftest")
@run_options
@click.pass_context
def selftest(context, **flags):
    """Oracle equivalence, ordering and prior-mass suites"""
    _invoke(context, "selftest", flags)


def main(argv: Optional[Sequence[str]] = None):
    """Console entry point; usage errors exit with EX_USAGE"""
    try:
        code = cli.main(args=argv, prog_name="switchcast", standalone_mode=False)
    except click.UsageError as error:
        error.show()
        raise SystemExit(status.EX_USAGE) from error
    except click.Abort as error:
        raise SystemExit(status.EX_FAILURE) from error
    raise SystemExit(code if isinstance(code, int) else status.EX_OK)
