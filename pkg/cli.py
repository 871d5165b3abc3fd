"""Command line interface for the relay NOMA link analyzer."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from rich.console import Console
from rich.markdown import Markdown
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .dependencies import EvaluationContext
from .exceptions import LinkModelError, ScenarioValidationError
from .models import ResultRow, RunMode
from .scenario import link_budget, load_scenario_file, resolve_scenario
from .settings import load_settings
from .sweep import run_sweep

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def print_header(title: str):
    """Print command header."""
    header = f"""
    # Relay NOMA Link Analyzer
    ## {title}
    """
    console.print(Panel(Markdown(header), style="blue"))


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6g}"


def print_rows(rows: Sequence[ResultRow]):
    """Render sweep rows as a table."""
    table = Table(show_header=True, header_style="bold cyan")
    for column in ("series", "axis", "metric", "closed", "mc mean", "mc stderr", "3σ", "ms"):
        table.add_column(column)

    for row in rows:
        if row.error:
            flag = "[red]error[/red]"
        elif row.agree_3sigma is None:
            flag = ""
        else:
            flag = "[green]yes[/green]" if row.agree_3sigma else "[red]no[/red]"
        table.add_row(
            row.series, f"{row.axis:g}", row.metric.value, _fmt(row.closed_form),
            _fmt(row.mc_mean), _fmt(row.mc_stderr), flag, f"{row.wall_ms:.0f}",
        )
    console.print(table)

    errors = [row for row in rows if row.error]
    if errors:
        console.print(f"[yellow]{len(errors)} rows carry errors; first: {errors[0].error}[/yellow]")


def analyze(args: argparse.Namespace) -> int:
    """Run the scenario's sweep and write the CSV."""
    settings = load_settings()
    ctx = EvaluationContext.from_settings(
        settings, jitter_degenerate=settings.jitter_degenerate or args.jitter_degenerate,
    )
    document = load_scenario_file(args.scenario)
    # Resolve once up front so validation errors exit with the validation code.
    resolve_scenario(document, ctx.distinct_rel_tol, ctx.jitter_degenerate)

    print_header(f"analyze {document.name}")
    mode = RunMode(args.mode)
    rows = run_sweep(
        document,
        mode=mode,
        ctx=ctx,
        iterations=args.mc_iters,
        seed=args.seed,
        out_path=args.out,
    )
    print_rows(rows)
    if args.out:
        console.print(f"\n[green]✅ Wrote {len(rows)} rows to {args.out}[/green]")
    return EXIT_OK


def describe(args: argparse.Namespace) -> int:
    """Print the resolved link budget of a scenario."""
    settings = load_settings()
    document = load_scenario_file(args.scenario)
    config = resolve_scenario(document, settings.distinct_rel_tol, settings.jitter_degenerate)

    print_header(f"describe {config.name}")
    table = Table(show_header=False, padding=(0, 2))
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="white")
    for key, value in link_budget(config).items():
        if isinstance(value, list):
            text = ", ".join(f"{v:.4e}" for v in value) or "none"
        else:
            text = f"{value:.6e}"
        table.add_row(key, text)

    th = config.thresholds
    for label, gamma, rate in (
        ("gamma1", th.gamma1, th.rate1),
        ("gamma2", th.gamma2, th.rate2),
        ("gamma_sum", th.gamma_sum, th.rate_sum),
    ):
        if gamma is not None:
            table.add_row(label, f"{gamma:.6g} ({rate:.4f} bits/s/Hz)")

    console.print(Panel(table, title=f"{config.backhaul.kind.upper()} backhaul", style="green"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Relay NOMA Link Analyzer - outage and ergodic rate evaluation")
    parser.add_argument("--version", action="version", version=f"relay-noma-link {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("analyze", help="Evaluate a scenario sweep")
    run.add_argument("--scenario", required=True, help="Scenario TOML file")
    run.add_argument("--mode", choices=[m.value for m in RunMode], default=RunMode.CLOSED.value)
    run.add_argument("--mc-iters", type=int, default=None, help="Monte Carlo iterations (overrides [mc])")
    run.add_argument("--seed", type=int, default=None, help="Master seed (overrides [mc])")
    run.add_argument("--out", default=None, help="CSV output path")
    run.add_argument("--jitter-degenerate", action="store_true",
                     help="Perturb degenerate or duplicate inputs by 1e-9 relative instead of failing")
    run.set_defaults(handler=analyze)

    info = commands.add_parser("describe", help="Print the resolved link budget")
    info.add_argument("--scenario", required=True, help="Scenario TOML file")
    info.set_defaults(handler=describe)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioValidationError as e:
        console.print(f"[red]❌ Invalid scenario: {e}[/red]")
        return EXIT_VALIDATION
    except LinkModelError as e:
        console.print(f"[red]❌ Numerical error: {e}[/red]")
        return EXIT_NUMERICAL
    except OSError as e:
        console.print(f"[red]❌ Cannot read or write files: {e}[/red]")
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return 130


if __name__ == "__main__":
    sys.exit(main())
