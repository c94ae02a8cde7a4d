#!/usr/bin/env python3
"""
Default-time toolkit - build families and verify default-time identities

Usage:
    toolkit.py build --config configs/t2.json
    toolkit.py verify --config configs/natural_mc.json --seed 42 --paths 2000
    toolkit.py density --config configs/t2.json --out-dir out/t2
    toolkit.py order-stats --config configs/copula_d3.json
    toolkit.py drift --config configs/t2.json
    toolkit.py report out/t2 --emit density
"""

import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

# Add repo root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.natural import dump_paths, simulate_model
from src.runner import (
    ConfigError,
    MissingArtifact,
    SuiteError,
    emit_plotdata,
    load_config,
    load_report,
    run,
)


def setup_logging(verbose: bool = False):
    """Setup logging configuration"""
    log_dir = Path(os.environ.get("DEFAULT_TIME_LOG_DIR",
                                  Path.home() / ".cache" / "default-time-toolkit"))
    log_dir.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_dir / "toolkit.log"),
            logging.StreamHandler(sys.stdout)
        ]
    )


def _scenario_options(f):
    f = click.option("--verbose", "-v", is_flag=True, help="Debug logging")(f)
    f = click.option("--step", type=float, help="Monte Carlo step size override")(f)
    f = click.option("--paths", type=int, help="Monte Carlo path count override")(f)
    f = click.option("--out-dir", type=click.Path(), help="Output directory")(f)
    f = click.option("--seed", type=int, help="Seed override")(f)
    f = click.option("--config", "config_path", required=True, type=click.Path(exists=True),
                     help="Scenario JSON file")(f)
    return f


def _run(config_path, seed, out_dir, paths, step, verbose, suites=None):
    setup_logging(verbose)
    logger = logging.getLogger("toolkit")
    try:
        config = load_config(config_path).with_overrides(seed=seed, paths=paths, step=step,
                                                         out_dir=out_dir)
        if suites is not None:
            config = replace(config, suites=suites)
            config.validate()
        report = run(config)
    except ConfigError as e:
        click.echo(f"❌ Invalid scenario: {e}", err=True)
        sys.exit(1)
    except SuiteError as e:
        logger.error(str(e), exc_info=True)
        click.echo(f"❌ {e}", err=True)
        sys.exit(1)

    for line in report.summary():
        click.echo(line)
    if not report.passed:
        click.echo(f"❌ {config.name}: checks failed (see {config.resolved_out_dir()})", err=True)
        sys.exit(1)
    click.echo(f"✅ {config.name}: all checks passed")
    return config, report


@click.group()
def cli():
    """Default-time toolkit - families, densities, order statistics and drifts"""


@cli.command()
@_scenario_options
def build(config_path, seed, out_dir, paths, step, verbose):
    """Build the family of the scenario and check its axioms."""
    _run(config_path, seed, out_dir, paths, step, verbose, suites=["im"])


@cli.command()
@_scenario_options
def verify(config_path, seed, out_dir, paths, step, verbose):
    """Run every suite the scenario lists."""
    _run(config_path, seed, out_dir, paths, step, verbose)


@cli.command()
@_scenario_options
@click.option("--dump-paths", "dump", is_flag=True, help="Also write the simulated paths (mc only)")
def density(config_path, seed, out_dir, paths, step, verbose, dump):
    """Compute the density of the family (tree) or of the natural flows (mc)."""
    try:
        config = load_config(config_path)
    except ConfigError as e:
        click.echo(f"❌ Invalid scenario: {e}", err=True)
        sys.exit(1)
    suites = ["natural"] if config.engine == "mc" or config.model == "natural" else ["im"]
    config, report = _run(config_path, seed, out_dir, paths, step, verbose, suites=suites)
    if dump:
        if config.engine != "mc":
            click.echo("⚠️  --dump-paths only applies to Monte Carlo scenarios")
            return
        model = simulate_model(config.mc)
        data, sidecar = dump_paths(model, config.resolved_out_dir() / "paths.f64")
        click.echo(f"📦 Paths written to {data} ({sidecar.name})")


@cli.command("order-stats")
@_scenario_options
def order_stats(config_path, seed, out_dir, paths, step, verbose):
    """Order-statistic laws and densities of a copula scenario."""
    _run(config_path, seed, out_dir, paths, step, verbose, suites=["copula"])


@cli.command()
@_scenario_options
def drift(config_path, seed, out_dir, paths, step, verbose):
    """Drift of base-filtration martingales in the enlarged filtration."""
    _run(config_path, seed, out_dir, paths, step, verbose, suites=["enlargement"])


@cli.command()
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--emit", type=click.Choice(["density", "order-cdf", "drift"]),
              help="Print the path of (or copy) a plot-data CSV")
@click.option("--out-dir", type=click.Path(), help="Copy the emitted CSV here")
def report(report_path, emit, out_dir):
    """Summarize a written report and verify its checksums."""
    setup_logging()
    try:
        data = load_report(report_path)
    except MissingArtifact as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(1)
    click.echo(f"📋 {data['scenario']}: {'pass' if data['passed'] else 'FAIL'}")
    for name, suite in data["suites"].items():
        failed = [c for c, check in suite["checks"].items() if not check["passed"]]
        status = "pass" if suite["passed"] else f"FAIL ({', '.join(failed)})"
        click.echo(f"  {name}: {status}")
    if emit:
        try:
            path = emit_plotdata(report_path, emit, out_dir)
        except MissingArtifact as e:
            click.echo(f"❌ {e}", err=True)
            sys.exit(1)
        click.echo(str(path))
    if not data["passed"]:
        sys.exit(1)


if __name__ == "__main__":
    cli()
