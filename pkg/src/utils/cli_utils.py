#!/usr/bin/env python3
"""
CLI Utilities - Console Output

Rich tables and panels for configurations, witnesses, key rates and
post-selection summaries.
"""

import math
from rich.console import Console
from rich.table import Table
from rich.panel import Panel
from rich import box
from typing import Dict, Any, Iterable, Optional

console = Console()


def print_banner():
    """Print the application banner"""
    banner = """
    ╔═══════════════════════════════════════════════════════╗
    ║   Measurement-Based Noiseless Linear Amplification    ║
    ║   Gaussian Entanglement Distillation Simulator        ║
    ╚═══════════════════════════════════════════════════════╝
    """
    console.print(banner, style="bold cyan")


def print_section(title: str, style: str = "bold blue"):
    """Print a section header"""
    console.print(f"\n[{style}]{'='*60}")
    console.print(f"[{style}]{title}")
    console.print(f"[{style}]{'='*60}[/{style}]\n")


def print_info(message: str):
    console.print(f"[blue]ℹ[/blue] {message}")


def print_success(message: str):
    console.print(f"[green]✓[/green] {message}", style="green")


def print_warning(message: str):
    console.print(f"[yellow]⚠[/yellow] {message}", style="yellow")


def print_error(message: str, diagnostics: Optional[Dict[str, Any]] = None):
    """Print an error message with optional diagnostic values"""
    console.print(f"[red]✗[/red] {message}", style="red")
    for key, value in (diagnostics or {}).items():
        console.print(f"    [dim]{key}[/dim] = {value}")


def _fmt(value: Any, digits: int = 5) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{digits}g}"
    return str(value)


def print_experiment_config(config: Dict[str, Any]):
    """Print the resolved experiment configuration"""
    table = Table(title="Experiment Configuration", box=box.ROUNDED)
    table.add_column("Setting", style="cyan", no_wrap=True)
    table.add_column("Value", style="green")

    state = config.get('state', {})
    table.add_row("State", ", ".join(f"{k}={v}" for k, v in state.items() if v is not None))
    channels = config.get('channels', [])
    table.add_row("Channels", "; ".join(f"{c['mode']}: T={c['T']:g}, n_th={c['n_th']:g}"
                                        for c in channels) or "none")
    table.add_row("Shots", f"{config.get('shots', 0):,}")
    table.add_row("Seed", str(config.get('seed')))
    filter_settings = config.get('filter', {})
    table.add_row("Gains", ", ".join(f"{g:g}" for g in filter_settings.get('gains', [])))
    table.add_row("Cut-off (sd)", _fmt(filter_settings.get('k_sd')))
    table.add_row("beta_rec", _fmt(config.get('beta_rec')))
    table.add_row("Workers", str(config.get('workers')))

    console.print(table)


def print_criteria_table(statistics: Dict[str, Dict[str, Any]],
                         analytic: Optional[Dict[str, float]] = None):
    """
    Print witness values with their bootstrap intervals

    Args:
        statistics: Mapping name -> {'value', 'ci_low', 'ci_high'}
        analytic: Optional exact values for comparison
    """
    table = Table(title="Entanglement Criteria (SNU)", box=box.DOUBLE)
    table.add_column("Statistic", style="cyan", no_wrap=True)
    table.add_column("Value", style="green", justify="right")
    table.add_column("Interval", style="yellow", justify="right")
    if analytic:
        table.add_column("Exact", style="magenta", justify="right")

    for name, entry in statistics.items():
        row = [name, _fmt(entry.get('value')),
               f"[{_fmt(entry.get('ci_low'))}, {_fmt(entry.get('ci_high'))}]"]
        if analytic:
            row.append(_fmt(analytic.get(name)))
        table.add_row(*row)

    console.print(table)


def print_keyrate_table(reports: Iterable[Dict[str, Any]]):
    """Print one key-rate row per gain"""
    table = Table(title="Key Rate (bits per use)", box=box.DOUBLE)
    table.add_column("g", style="cyan", justify="right")
    table.add_column("I(A:B)", justify="right")
    table.add_column("S(A:E)", justify="right")
    table.add_column("K", style="green", justify="right")
    table.add_column("1σ interval", style="yellow", justify="right")
    table.add_column("Note", style="red")

    for report in reports:
        interval = "-"
        if report.get('k_low') is not None:
            interval = f"[{_fmt(report['k_low'])}, {_fmt(report['k_high'])}]"
        note = report.get('error') or ("channel model mismatch" if report.get('model_mismatch') else "")
        table.add_row(_fmt(report.get('gain')), _fmt(report.get('i_ab')), _fmt(report.get('s_ae')),
                      _fmt(report.get('k')), interval, note)

    console.print(table)


def print_normality_table(report: Dict[str, Any]):
    table = Table(title=f"Normality (Jarque-Bera, {report.get('confidence', 0.95):.0%})", box=box.ROUNDED)
    table.add_column("Stream", style="cyan")
    table.add_column("Skewness", justify="right")
    table.add_column("Excess kurtosis", justify="right")
    table.add_column("JB", justify="right")
    table.add_column("Pass", justify="center")

    for name, stream in report.get('streams', {}).items():
        table.add_row(name, _fmt(stream['skewness'], 3), _fmt(stream['excess_kurtosis'], 3),
                      _fmt(stream['jb_statistic'], 4),
                      "[green]yes[/green]" if stream['jb_pass'] else "[red]no[/red]")

    console.print(table)


def print_acceptance_summary(gain: float, n_in: int, n_accept: int, p_success: float,
                             p_analytic: Optional[float] = None):
    """Print the outcome of one post-selection"""
    lines = [
        f"[cyan]Gain:[/cyan]          {gain:g}",
        f"[cyan]Accepted:[/cyan]      {n_accept:,} / {n_in:,}",
        f"[cyan]p_success:[/cyan]     {p_success:.4e}",
    ]
    if p_analytic is not None:
        stderr = math.sqrt(p_analytic * (1.0 - p_analytic) / n_in) if n_in else float('nan')
        lines.append(f"[cyan]Exact:[/cyan]         {p_analytic:.4e} (binomial se {stderr:.1e})")
    console.print(Panel("\n".join(lines), title="Post-selection", box=box.ROUNDED, style="blue"))


def print_completion_banner(run_id: str, outputs: Dict[str, str]):
    """Print completion banner with output locations"""
    listing = "\n".join(f"  [cyan]{name}:[/cyan] {path}" for name, path in outputs.items())
    panel = Panel(
        f"""[bold green]✓ Completed[/bold green]

[cyan]Run ID:[/cyan] {run_id}
{listing}""",
        box=box.DOUBLE,
        style="green"
    )
    console.print(panel)
