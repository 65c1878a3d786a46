"""Command-line entry point: ``tfoc run|norm|quantize|fio|schatten``."""

import csv
import json
import logging

import click

from config import Config
from tfoc.core.errors import TFOCError
from tfoc.core.logging_config import setup_logging
from tfoc.services.fio import kernel_map, parse_phase
from tfoc.services.harness_service import run_all, to_jsonable
from tfoc.services.modspace import MixedNormSpec, mod_norm
from tfoc.services.quantize import exchange, kernel_from_symbol
from tfoc.services.schatten import schatten_norms
from tfoc.services.stft import gaussian_window
from tfoc.services.tables import load_kernel, load_signal, load_symbol, save_table
from tfoc.services.weights import parse_weight

logger = logging.getLogger(__name__)


def _fail(ctx, error: TFOCError):
    logger.error(f"{error.__class__.__name__}: {error.message}")
    click.echo(f"Error: {error.message}", err=True)
    ctx.exit(error.exit_code)


@click.group()
@click.option("--log-level", default=None, help="Logging level (defaults to LOG_LEVEL or INFO).")
@click.option("--log-dir", default="logs", show_default=True)
@click.version_option(Config.APP_VERSION, prog_name=Config.APP_NAME)
def main(log_level, log_dir):
    """Time-frequency operator calculus on periodic grids."""
    setup_logging(level=log_level, log_dir=log_dir)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--report-dir", default=Config.REPORT_DIR, show_default=True)
@click.option("--workers", type=int, default=None, help="Thread pool size (defaults to TFOC_WORKERS).")
@click.option("--dat/--no-dat", default=True, help="Also write gnuplot-friendly .dat tables.")
@click.pass_context
def run(ctx, config_path, report_dir, workers, dat):
    """Run every experiment in CONFIG and write the report bundle."""
    exit_code, bundle = run_all(config_path, report_dir=report_dir, workers=workers, dat=dat)
    if "error" in bundle:
        click.echo(f"Error: {bundle['error']}", err=True)
    else:
        for experiment in bundle["experiments"]:
            status = "PASS" if experiment["pass"] else experiment["status"].upper()
            if status == "COMPLETED":
                status = "FAIL"
            click.echo(f"{experiment['experiment_id']}: {status}")
        click.echo(f"Reports written to {report_dir}")
    ctx.exit(exit_code)


@main.command()
@click.option("--signal", "signal_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p", default="2", show_default=True)
@click.option("--q", "q", default=None, help="Outer exponent (defaults to p).")
@click.option("--weight", default="one", show_default=True)
@click.option("--window-width", default=1.0, show_default=True, type=float)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Append a CSV row here.")
@click.pass_context
def norm(ctx, signal_path, p, q, weight, window_width, output):
    """Print ||f||_{M^{p,q}(omega)} for a signal CSV."""
    try:
        signal = load_signal(signal_path)
        spec = MixedNormSpec(p, p if q is None else q, parse_weight(weight, 2))
        value = mod_norm(signal, gaussian_window(signal.grid, width=window_width), spec)
    except TFOCError as e:
        _fail(ctx, e)
    if output:
        with open(output, "a", newline="") as handle:
            csv.writer(handle).writerow([signal_path, spec.to_dict()["p"], spec.to_dict()["q"],
                                         spec.omega.descriptor, repr(value)])
    click.echo(json.dumps(to_jsonable({"signal": signal_path, **spec.to_dict(), "norm": value}), sort_keys=True))


@main.command()
@click.option("--symbol", "symbol_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--t", "t", default=0.0, show_default=True, type=float)
@click.option("--to-t", "to_t", default=None, type=float, help="Re-express the symbol for another t instead.")
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def quantize(ctx, symbol_path, t, to_t, output):
    """Write the t-quantized kernel of a symbol CSV (or the exchanged symbol with --to-t)."""
    try:
        symbol = load_symbol(symbol_path)
        if to_t is None:
            result = kernel_from_symbol(symbol, t)
            save_table(output, result.entries, result.grid)
        else:
            result = exchange(symbol, t, to_t)
            save_table(output, result.values, result.grid)
    except TFOCError as e:
        _fail(ctx, e)
    click.echo(f"Wrote {output}")


@main.command()
@click.option("--phase", "phase_descriptor", required=True, help="Phase descriptor, e.g. linear_plus_sin(0.1).")
@click.option("--symbol", "symbol_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def fio(ctx, phase_descriptor, symbol_path, output):
    """Write the kernel K_{a,phi} of a symbol a(x, zeta) CSV."""
    try:
        phase = parse_phase(phase_descriptor)
        kernel = kernel_map(load_symbol(symbol_path), phase)
        save_table(output, kernel.entries, kernel.grid)
    except TFOCError as e:
        _fail(ctx, e)
    click.echo(f"Wrote {output}")


@main.command()
@click.option("--kernel", "kernel_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def schatten(ctx, kernel_path):
    """Print singular values and Schatten norms of a kernel CSV as JSON."""
    try:
        report = schatten_norms(load_kernel(kernel_path))
    except TFOCError as e:
        _fail(ctx, e)
    click.echo(json.dumps(to_jsonable(report.to_dict()), sort_keys=True))


if __name__ == "__main__":
    main()
