"""Command line entry point: ``gtbo run CONFIG``."""

from __future__ import annotations

import logging
import sys

import click

from .config import MODES, PRESETS, load_config
from .errors import ConfigError


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Group testing followed by Bayesian optimization on synthetic benchmarks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Dotted-key override, repeatable.")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "output_dir", type=click.Path(file_okay=False), default=None)
def run(config, overrides, preset, mode, seed, output_dir) -> None:
    """Run one experiment described by the TOML file CONFIG."""
    from .runner import execute

    try:
        cfg = load_config(config, overrides, preset, mode=mode, seed=seed, output_dir=output_dir)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    summary = execute(cfg)
    click.echo(f"{summary['status']}: artifacts in {cfg.output_dir}")
    if summary["status"] != "ok":
        click.echo(summary.get("error") or "run failed", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
