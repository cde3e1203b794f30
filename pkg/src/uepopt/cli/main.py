"""
uepopt CLI - Importance-aware resource allocation for digital feature links.

Commands:
    solve        - Solve one allocation instance with a chosen strategy
    sweep        - Run a config-driven Monte Carlo sweep to CSV
    validate     - Compare the solver with exhaustive search
    simulate     - Run a plan through the bit-level link simulator
    profile-gen  - Write a synthetic importance profile
"""

import functools
import json
import logging
import math
import re
from pathlib import Path
from typing import NamedTuple

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from uepopt import __version__
from uepopt.core.errors import DomainError, UepError

console = Console()

SNR_PATTERN = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(db|lin)\s*$", re.I)
DEFAULT_SIM_BITS = 100_000
DEFAULT_N_FEATURES = 8


class Snr(NamedTuple):
    db: float
    linear: float


class SnrParam(click.ParamType):
    """SNR with a mandatory unit: "3dB", "-10 dB" or "2.5lin"."""

    name = "snr"

    def convert(self, value, param, ctx):
        if isinstance(value, Snr):
            return value
        match = SNR_PATTERN.match(str(value))
        if not match:
            self.fail(f"{value!r} needs a unit suffix, e.g. 0dB or 1.5lin", param, ctx)
        number, unit = float(match.group(1)), match.group(2).lower()
        if unit == "db":
            return Snr(number, 10.0 ** (number / 10.0))
        if number <= 0:
            self.fail(f"linear SNR must be positive, got {number}", param, ctx)
        return Snr(10.0 * math.log10(number), number)


class SpreadParam(click.ParamType):
    """Non-negative SNR spread in dB, unit required: "5dB"."""

    name = "spread"

    def convert(self, value, param, ctx):
        if isinstance(value, float):
            return value
        match = SNR_PATTERN.match(str(value))
        if not match or match.group(2).lower() != "db":
            self.fail(f"{value!r} needs a dB suffix, e.g. 5dB", param, ctx)
        spread = float(match.group(1))
        if spread < 0:
            self.fail(f"spread must be non-negative, got {spread}", param, ctx)
        return spread


class SnrListParam(click.ParamType):
    """Comma-separated SNRs, each with a unit."""

    name = "snr-list"

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return list(value)
        return [SnrParam().convert(part, param, ctx) for part in str(value).split(",") if part]


def handle_errors(func):
    """Report library errors as click errors (exit code 1)."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except UepError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def instance_options(func):
    """Options describing one allocation instance."""
    options = [
        click.option("--weights", type=click.Path(exists=True), help="Weight file, one per line"),
        click.option(
            "--profile",
            default="isfr_paper_like",
            show_default=True,
            help="Synthetic profile kind when no weight file is given",
        ),
        click.option("--profile-param", type=float, help="Synthetic profile parameter"),
        click.option(
            "--n",
            "n_features",
            type=int,
            help=f"Number of features [default: {DEFAULT_N_FEATURES}, or the --gammas count]",
        ),
        click.option(
            "--gamma-avg",
            type=SnrParam(),
            default="0dB",
            show_default=True,
            help="Average normalized SNR (unit required)",
        ),
        click.option(
            "--spread",
            type=SpreadParam(),
            default="5dB",
            show_default=True,
            help="SNR spread around --gamma-avg (dB unit required)",
        ),
        click.option("--gammas", type=SnrListParam(), help="Explicit SNRs, e.g. 3dB,0dB,1.5lin"),
        click.option("--pmax", default=1.0, show_default=True, help="Per-channel power budget (W)"),
        click.option("--mmin", default=4.0, show_default=True, help="Average rate (bits/symbol)"),
        click.option("--dt", default=0.22, show_default=True, help="Discarded-feature penalty"),
        click.option(
            "--seed",
            default=0,
            envvar="UEPOPT_SEED",
            show_envvar=True,
            show_default=True,
            help="Seed for synthetic weights and channel draws",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_instance(
    weights,
    profile,
    profile_param,
    n_features,
    gamma_avg,
    spread,
    gammas,
    pmax,
    mmin,
    dt,
    seed,
):
    """
    Resolve CLI flags into (profile, channel state, budget).

    The feature count comes from the weight file, else from --gammas, else
    from --n. An explicit --n that disagrees with either is an error.
    """
    from uepopt.core.importance import load_profile, synthetic_profile
    from uepopt.core.matching import ChannelState
    from uepopt.core.solver import ResourceBudget
    from uepopt.harness.runner import sample_channel

    if weights:
        w = load_profile(weights)
        if n_features is not None and n_features != w.n_features:
            raise DomainError(f"--n {n_features} disagrees with {w.n_features} weights in file")
    else:
        n = len(gammas) if gammas else DEFAULT_N_FEATURES
        if n_features is not None:
            if gammas and n_features != len(gammas):
                raise DomainError(f"--n {n_features} disagrees with {len(gammas)} --gammas")
            n = n_features
        w = synthetic_profile(profile, n, profile_param, seed)
    if gammas:
        ch = ChannelState.from_values([g.linear for g in gammas])
    else:
        ch = sample_channel(gamma_avg.db, spread, w.n_features, seed)
    return w, ch, ResourceBudget(p_max=pmax, m_min=mmin, d_t=dt)


def _db(value: float) -> str:
    return f"{10.0 * math.log10(value):.2f}"


def plan_table(plan, report, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Rank", style="cyan", justify="right")
    table.add_column("Feature", style="green", justify="right")
    table.add_column("Channel", justify="right")
    table.add_column("SNR (dB)", justify="right")
    table.add_column("Bits/sym", style="yellow", justify="right")
    table.add_column("Power (W)", style="magenta", justify="right")
    table.add_column("BER", justify="right")
    for rank, feature in enumerate(plan.retained):
        table.add_row(
            str(rank),
            str(feature),
            str(plan.matching.channel_of(feature)),
            _db(plan.gamma_of(feature)),
            str(plan.orders[rank]),
            f"{plan.powers[rank]:.4f}",
            f"{report.per_feature_ber[rank]:.3e}",
        )
    return table


@click.group()
@click.version_option(version=__version__, prog_name="uepopt")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, verbose):
    """
    uepopt - Unequal error protection for importance-weighted features.

    Matches features to subchannels, truncates, and picks QAM orders and
    powers so the most important features are protected best.
    """
    ctx.ensure_object(dict)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@cli.command()
@instance_options
@click.option("--strategy", default="JCFMP", show_default=True, help="Allocation strategy")
@click.option("--no-early-stop", is_flag=True, help="Visit every truncation index")
@click.option("--json", "as_json", is_flag=True, help="Print a machine-readable document")
@click.option("--out", type=click.Path(), help="Also write the JSON document to a file")
@handle_errors
def solve(strategy, no_early_stop, as_json, out, **instance):
    """
    Solve one allocation instance.

    Prints the plan (rank, feature, channel, order, power, BER) and the
    distortion split into transmission and truncation terms.
    """
    from uepopt.cli.documents import SolveDocument
    from uepopt.core.solver import SolveOptions
    from uepopt.core.solver import solve as run_solve

    w, ch, budget = build_instance(**instance)
    plan, report = run_solve(strategy, w, ch, budget, SolveOptions(early_stop=not no_early_stop))
    document = SolveDocument.build(w, ch, budget, plan, report)

    if out:
        text = document.model_dump_json(indent=2) + "\n"
        Path(out).expanduser().write_text(text, encoding="utf-8")
    if as_json:
        click.echo(document.model_dump_json(indent=2))
        return

    title = f"{report.strategy_name} plan (k = {plan.k} of {w.n_features})"
    console.print(plan_table(plan, report, title))
    if plan.discarded:
        console.print(f"[yellow]Discarded features:[/] {', '.join(map(str, plan.discarded))}")
    console.print(f"  Transmission term: {report.transmission_term:.6e}")
    console.print(f"  Truncation term:   {report.truncation_term:.6e}")
    console.print(f"[bold green]  Total distortion J: {report.total_j:.6e}[/]")
    stats = report.solve_stats
    console.print(
        f"  Candidates evaluated: {stats.candidates_evaluated}, "
        f"k visited: {', '.join(map(str, stats.k_visited))}"
    )


@cli.command()
@click.argument("config", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="CSV path (overrides the config)")
@click.option("--seed", type=int, envvar="UEPOPT_SEED", show_envvar=True, help="Master seed")
@click.option("--trials", type=int, help="Trials per grid point (overrides the config)")
@click.option("--threads", type=int, help="Worker processes (overrides the config)")
@click.option("--json", "as_json", is_flag=True, help="Also write a JSON mirror")
@handle_errors
def sweep(config, out, seed, trials, threads, as_json):
    """
    Run a Monte Carlo sweep from a TOML or JSON config.

    Writes one CSV row per grid point and strategy.
    """
    from uepopt.harness.config import load_config
    from uepopt.harness.runner import run_experiment, write_results

    cfg = load_config(config)
    overrides = {
        "seed": seed,
        "trials": trials,
        "workers": threads,
        "output": out,
        "json_mirror": True if as_json else None,
    }
    changes = {key: value for key, value in overrides.items() if value is not None}
    cfg = cfg.model_validate({**cfg.model_dump(), **changes})
    target = cfg.output or "results.csv"

    total = len(cfg.grid) * cfg.trials
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
    ) as progress:
        task = progress.add_task("Running trials...", total=total)
        table = run_experiment(cfg, on_task=lambda: progress.advance(task))

    path = write_results(table, target, cfg.json_mirror)
    console.print(f"[bold green]Sweep complete![/] {len(table)} rows written to {path}")

    summary = Table(title="Mean distortion")
    for column in ("gamma_avg_db", "p_max", "m_min", "strategy", "mean_j", "mean_k"):
        summary.add_column(column, justify="right")
    for row in table.head(20).itertuples(index=False):
        summary.add_row(
            f"{row.gamma_avg_db:g}",
            f"{row.p_max:g}",
            f"{row.m_min:g}",
            row.strategy,
            f"{row.mean_j:.4e}",
            f"{row.mean_k:.2f}",
        )
    console.print(summary)


@cli.command()
@click.option("--instances", default=1000, show_default=True, help="Random instances")
@click.option("--n", "n_features", default=6, show_default=True, help="Features, at most 6")
@click.option("--seed", default=0, envvar="UEPOPT_SEED", show_envvar=True, show_default=True)
@click.option(
    "--check-every",
    type=click.IntRange(min=0),
    default=50,
    show_default=True,
    help="Run the shortcut checks on every k-th instance (0: off)",
)
@click.option(
    "--matching-every",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Search all N! matchings on every k-th instance (0: off)",
)
@click.option(
    "--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Worker processes"
)
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON")
@handle_errors
def validate(instances, n_features, seed, check_every, matching_every, threads, as_json):
    """
    Compare the solver with exhaustive search on random instances.

    Reports the match rate, gap statistics and power-allocation residuals,
    plus measured violation rates of the early-stop, prefix-subset,
    pruning and matching shortcuts on the sampled instances.
    """
    from uepopt.harness.validation import ValidationSettings
    from uepopt.harness.validation import validate as run_validate

    settings = ValidationSettings(
        instances=instances,
        n_features=n_features,
        seed=seed,
        check_every=check_every,
        matching_every=matching_every,
        workers=threads,
    )
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console,
        disable=as_json,
    ) as progress:
        task = progress.add_task("Validating...", total=instances)
        report = run_validate(settings, on_instance=lambda: progress.advance(task))

    if as_json:
        click.echo(report.model_dump_json(indent=2))
        return

    table = Table(title=f"Validation ({instances} instances, N = {n_features})")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for name, value in report.model_dump().items():
        table.add_row(name, "n/a" if value is None else f"{value:.6g}")
    console.print(table)


@cli.command()
@click.option("--plan", "plan_path", type=click.Path(exists=True), help="Output of solve --json")
@instance_options
@click.option("--strategy", default="JCFMP", show_default=True, help="Used without --plan")
@click.option("--bits", default=DEFAULT_SIM_BITS, show_default=True, help="Bits per feature")
@click.option("--levels", type=click.Path(exists=True), help="Quantizer level file")
@click.option("--features", "features_path", type=click.Path(exists=True), help="N x L feature CSV")
@click.option("--gray", is_flag=True, help="Gray-code quantization indices")
@click.option("--json", "as_json", is_flag=True, help="Print the measurements as JSON")
@handle_errors
def simulate(plan_path, strategy, bits, levels, features_path, gray, as_json, **instance):
    """
    Run a plan through the bit-level link simulator.

    Compares empirical with analytic BER per retained feature, and the
    measured distortion with the analytic one.
    """
    from uepopt.cli.documents import load_document
    from uepopt.core.solver import objective
    from uepopt.core.solver import solve as run_solve
    from uepopt.sim.link import (
        FadingChannel,
        Quantizer,
        end_to_end_run,
        load_features,
        load_levels,
        synthetic_features,
    )

    seed = instance["seed"]
    if plan_path:
        document = load_document(plan_path)
        w = document.instance.profile()
        ch = document.instance.channel()
        budget = document.instance.budget()
        plan = document.plan.to_plan()
        report = objective(w, plan, budget, document.plan.strategy)
    else:
        w, ch, budget = build_instance(**instance)
        plan, report = run_solve(strategy, w, ch, budget)

    q = load_levels(levels) if levels else Quantizer.uniform()
    if features_path:
        features = load_features(features_path)
    else:
        features = synthetic_features(w.n_features, max(1, math.ceil(bits / q.n_bits)), seed)
    channels = [FadingChannel.from_gamma(g, 1.0, seed, feature=c) for c, g in enumerate(ch.gammas)]
    measured = end_to_end_run(features, plan, w, q, channels, seed, budget.d_t, gray)

    if as_json:
        payload = {
            "retained": list(plan.retained),
            "empirical_ber": list(measured.per_feature_ber),
            "analytic_ber": list(measured.analytic_ber),
            "bits_sent": list(measured.bits_sent),
            "empirical_j": measured.total_j,
            "analytic_j": report.total_j,
        }
        click.echo(json.dumps(payload, indent=2))
        return

    table = Table(title="Empirical vs analytic BER")
    table.add_column("Rank", style="cyan", justify="right")
    table.add_column("Feature", style="green", justify="right")
    table.add_column("Bits/sym", justify="right")
    table.add_column("Analytic", style="magenta", justify="right")
    table.add_column("Empirical", style="yellow", justify="right")
    table.add_column("Errors/Bits", justify="right")
    for rank, feature in enumerate(plan.retained):
        table.add_row(
            str(rank),
            str(feature),
            str(plan.orders[rank]),
            f"{measured.analytic_ber[rank]:.3e}",
            f"{measured.per_feature_ber[rank]:.3e}",
            f"{measured.bit_errors[rank]}/{measured.bits_sent[rank]}",
        )
    console.print(table)
    retained = list(plan.retained)
    sent = q.dequantize(q.quantize(features[retained]))
    mse = float(np.mean((measured.reconstruction[retained] - sent) ** 2))
    console.print(f"  Analytic J:  {report.total_j:.6e}")
    console.print(f"  Empirical J: {measured.total_j:.6e}")
    console.print(f"  Reconstruction MSE on retained features: {mse:.4e}")


@cli.command("profile-gen")
@click.option("--kind", default="isfr_paper_like", show_default=True, help="Profile family")
@click.option("--n", "n_features", default=8, show_default=True, help="Number of features")
@click.option("--param", "parameter", type=float, help="Family parameter")
@click.option("--seed", default=0, envvar="UEPOPT_SEED", show_envvar=True, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Weight file to write")
@handle_errors
def profile_gen(kind, n_features, parameter, seed, out):
    """Write a synthetic importance profile, one weight per line."""
    from uepopt.core.importance import save_profile, synthetic_profile

    profile = synthetic_profile(kind, n_features, parameter, seed)
    path = save_profile(profile, out)
    console.print(f"[green]Wrote {profile.n_features} weights to[/] {path}")


if __name__ == "__main__":
    cli()
