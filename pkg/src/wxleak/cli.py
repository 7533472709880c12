"""Command-line interface.

Subcommands:

* ``run CONFIG``    - execute the scenario exactly as configured
* ``sweep CONFIG``  - same, but force the default 7-level leakage sweep
* ``noise-table``   - emit the induced-noise-temperature curve as CSV
* ``check``         - run the built-in invariant self-tests

Exit codes: 0 success, 1 validation/config error, 2 runtime error.
"""

from __future__ import annotations

import sys
from dataclasses import replace

import click

from .errors import ValidationError
from .experiment import (
    DEFAULT_LEAKAGE_SWEEP_DBW,
    emit_csv,
    emit_noise_table_csv,
    emit_summary,
    load_config,
    noise_table,
    run_scenario,
)
from .leakage import AntennaModel, LinkBudget
from . import selfcheck

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _run_scenario_command(
    config_path: str,
    out: str | None,
    verbose: bool,
    seed_override: int | None,
    force_default_sweep: bool,
) -> None:
    try:
        config = load_config(config_path, seed_override=seed_override)
        if force_default_sweep:
            config = replace(config, leakage_levels=DEFAULT_LEAKAGE_SWEEP_DBW)
        if verbose:
            click.echo(f"loaded config {config_path} (hash {config.config_hash[:12]})")
            if config.defaulted_fields:
                click.echo(f"defaults applied: {', '.join(config.defaulted_fields)}")
        report = run_scenario(config, trace_stream=sys.stdout if verbose else None)
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    emit_summary(report, sys.stdout)
    if out is not None:
        try:
            emit_csv(report, out)
        except OSError as exc:
            click.echo(f"runtime error: could not write {out}: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
        if verbose:
            click.echo(f"wrote {out}")


@click.group()
def main() -> None:
    """Leakage-to-forecast impact simulator."""


@main.command()
@click.argument("config_path", metavar="CONFIG")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write report CSV here.")
@click.option("--verbose", is_flag=True, help="Print provenance and progress.")
@click.option("--seed-override", type=int, default=None, help="Replace all seeds (n, n+1, n+2).")
def run(config_path: str, out: str | None, verbose: bool, seed_override: int | None) -> None:
    """Run the scenario described by CONFIG."""
    _run_scenario_command(config_path, out, verbose, seed_override, force_default_sweep=False)


@main.command()
@click.argument("config_path", metavar="CONFIG")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write report CSV here.")
@click.option("--verbose", is_flag=True, help="Print provenance and progress.")
@click.option("--seed-override", type=int, default=None, help="Replace all seeds (n, n+1, n+2).")
def sweep(config_path: str, out: str | None, verbose: bool, seed_override: int | None) -> None:
    """Run CONFIG with the default leakage sweep (-55 to -15 dBW)."""
    _run_scenario_command(config_path, out, verbose, seed_override, force_default_sweep=True)


@main.command("noise-table")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write CSV here instead of stdout.")
@click.option("--min", "min_dbw", type=float, default=-55.0, show_default=True, help="Lowest leakage level, dBW.")
@click.option("--max", "max_dbw", type=float, default=-15.0, show_default=True, help="Highest leakage level, dBW.")
@click.option("--step", type=float, default=1.0, show_default=True, help="Level spacing, dB.")
@click.option("--pathloss", type=float, default=130.0, show_default=True, help="Total link pathloss, dB.")
@click.option("--efficiency", type=float, default=0.95, show_default=True, help="Antenna radiation efficiency.")
def noise_table_command(
    out: str | None,
    min_dbw: float,
    max_dbw: float,
    step: float,
    pathloss: float,
    efficiency: float,
) -> None:
    """Emit induced noise temperature vs leakage power as CSV."""
    try:
        if step <= 0 or max_dbw < min_dbw:
            raise ValidationError("need step > 0 and max >= min")
        link = LinkBudget(total_pathloss_db=pathloss)
        antenna = AntennaModel(radiation_efficiency=efficiency)
        levels = []
        level = min_dbw
        while level <= max_dbw + 1e-9:
            levels.append(level)
            level += step
        rows = noise_table(levels, link, antenna)
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    if out is None:
        emit_noise_table_csv(rows, sys.stdout)
    else:
        try:
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                emit_noise_table_csv(rows, fh)
        except OSError as exc:
            click.echo(f"runtime error: could not write {out}: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)


@main.command()
@click.option("--verbose", is_flag=True, help="Show detail for passing checks too.")
def check(verbose: bool) -> None:
    """Run the invariant self-test suite."""
    try:
        results = selfcheck.run_all()
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        line = f"{status}  {result.name}"
        if verbose or not result.passed:
            line += f"  ({result.detail})"
        click.echo(line)
        failed += 0 if result.passed else 1
    if failed:
        click.echo(f"{failed} of {len(results)} checks failed", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"all {len(results)} checks passed")


if __name__ == "__main__":
    main()
