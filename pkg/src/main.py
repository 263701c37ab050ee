#!/usr/bin/env python3
"""
Main Entry Point
Command-line interface: simulate, filter, criteria, keyrate, normality, sweep, export
"""

import sys
import logging
from pathlib import Path
from typing import Any, Callable, Optional

import click

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from config.interface import SWEEP_MODES, ExperimentInterface
from pipeline.pipeline import ExperimentPipeline
from utils.cli_utils import (
    print_acceptance_summary, print_banner, print_completion_banner, print_criteria_table,
    print_error, print_experiment_config, print_info, print_keyrate_table, print_normality_table,
    print_section, print_success, print_warning,
)
from utils.errors import exit_code_for

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def _pipeline(ctx: click.Context, **overrides) -> ExperimentPipeline:
    options = ctx.obj
    interface = ExperimentInterface(options['config'])
    config = interface.resolve(seed=options['seed'], out=options['out'], **overrides)
    if not options['quiet']:
        print_experiment_config(config.to_dict())
    pipeline = ExperimentPipeline(config, console=not options['quiet'], progress=options['progress'])
    pipeline.log.log_run_start(config.to_dict())
    return pipeline


def _run(ctx: click.Context, command: str, action: Callable[[ExperimentPipeline], Any],
         pipeline_factory: Callable[[], ExperimentPipeline]):
    """Run one command, mapping failures to exit codes"""
    pipeline: Optional[ExperimentPipeline] = None
    try:
        pipeline = pipeline_factory()
        result = action(pipeline)
        pipeline.log.log_run_end({'command': command})
        return result
    except Exception as e:
        code = exit_code_for(e)
        print_error(f"{command} failed: {e}", getattr(e, 'diagnostics', None))
        if pipeline is not None:
            pipeline.log.log_error(f"{command} failed", e)
        else:
            logger.debug(f"{command} failed before the run started", exc_info=True)
        ctx.exit(code)
    finally:
        if pipeline is not None:
            pipeline.close()


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='YAML experiment recipe (built-in defaults when omitted)')
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Output directory for records, reports and tables')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None,
              help='Unsigned 64-bit seed')
@click.option('--progress/--no-progress', default=False, help='Show progress bars')
@click.option('--quiet', is_flag=True, help='Only print errors and the final summary')
@click.pass_context
def cli(ctx, config_path, out, seed, progress, quiet):
    """Measurement-based noiseless linear amplification simulator"""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, out=out, seed=seed, progress=progress, quiet=quiet)
    if not quiet:
        print_banner()


@cli.command()
@click.option('--shots', type=int, default=None, help='Number of shots')
@click.option('--record', 'record_out', type=click.Path(dir_okay=False), default=None,
              help='Output record file')
@click.pass_context
def simulate(ctx, shots, record_out):
    """Sample the configured state into a record file"""
    summary = _run(ctx, 'simulate', lambda p: p.simulate(record_out),
                   lambda: _pipeline(ctx, shots=shots))
    click.echo(f"state={summary['state']} n={summary['n_shots']} seed={summary['seed']} "
               f"path={summary['path']}")


@cli.command(name='filter')
@click.argument('record', type=click.Path(exists=True, dir_okay=False))
@click.option('--gain', type=float, default=None, help='Amplifier gain g >= 1')
@click.option('--cutoff-sd', type=float, default=None, help='Cut-off in standard deviations')
@click.option('--record', 'record_out', type=click.Path(dir_okay=False), default=None,
              help='Output record file')
@click.pass_context
def filter_command(ctx, record, gain, cutoff_sd, record_out):
    """Post-select a record with the amplifier filter"""
    summary = _run(ctx, 'filter', lambda p: p.filter(record, gain, record_out),
                   lambda: _pipeline(ctx, gain=gain, cutoff_sd=cutoff_sd))
    print_acceptance_summary(summary['gain'], summary['n_in'], summary['n_accept'],
                             summary['p_success'], summary['p_analytic'])
    print_success(f"Filtered record written to {summary['path']}")


@cli.command()
@click.argument('record', type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def criteria(ctx, record):
    """EPR and inseparability witnesses with bootstrap intervals"""
    result = _run(ctx, 'criteria', lambda p: p.criteria(record), lambda: _pipeline(ctx))
    content = result['report']['content']
    print_criteria_table(content['statistics'], content.get('analytic'))
    print_completion_banner(result['report']['run_id'], {'report': result['json'], 'table': result['csv']})


@cli.command()
@click.argument('record', type=click.Path(exists=True, dir_okay=False))
@click.option('--beta', type=float, default=None, help='Reconciliation efficiency')
@click.pass_context
def keyrate(ctx, record, beta):
    """Key rate of a record with a 1-sigma interval"""
    result = _run(ctx, 'keyrate', lambda p: p.keyrate(record, beta), lambda: _pipeline(ctx, beta=beta))
    content = result['report']['content']
    print_keyrate_table([content['keyrate']])
    if content.get('analytic'):
        print_info(f"Exact key rate for this gain: {content['analytic']['k']:.5g}")
    print_completion_banner(result['report']['run_id'], {'report': result['json'], 'table': result['csv']})


@cli.command()
@click.argument('record', type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def normality(ctx, record):
    """Skewness, kurtosis and Jarque-Bera diagnostics"""
    result = _run(ctx, 'normality', lambda p: p.normality(record), lambda: _pipeline(ctx))
    content = result['report']['content']
    print_normality_table(content['normality'])
    check = content.get('purity_check')
    if check and not check['consistent']:
        print_warning(f"Purity deviates from the ideal amplifier by {check['z_score']:.1f} standard errors")
    print_completion_banner(result['report']['run_id'], {'report': result['json'], 'table': result['csv']})


@cli.command()
@click.option('--mode', type=click.Choice(SWEEP_MODES), default=None, help='Analytic or Monte Carlo')
@click.option('--shots', type=int, default=None, help='Shots per Monte Carlo record')
@click.option('--cutoff-sd', type=float, default=None, help='Cut-off in standard deviations')
@click.option('--beta', type=float, default=None, help='Reconciliation efficiency')
@click.pass_context
def sweep(ctx, mode, shots, cutoff_sd, beta):
    """Success-probability, lossy-channel and key-rate tables"""
    result = _run(ctx, 'sweep', lambda p: p.sweep(),
                  lambda: _pipeline(ctx, mode=mode, shots=shots, cutoff_sd=cutoff_sd, beta=beta))
    content = result['report']['content']
    print_section("Sweep Summary", style="bold green")
    print_info(f"Points below the perfect-EPR bound: {content['points_below_perfect_epr']}")
    print_info(f"Key-rate sign changes: {content['keyrate_sign_changes']}")
    if content['failed_points']:
        print_warning(f"{content['failed_points']} sweep points failed; see the error columns")
    outputs = {name: result[name] for name in ('success_table', 'loss_table', 'keyrate_table', 'json')}
    print_completion_banner(result['report']['run_id'], outputs)


@cli.command()
@click.argument('record', type=click.Path(exists=True, dir_okay=False), required=False)
@click.option('--csv', 'csv_out', type=click.Path(dir_okay=False), default=None, help='Output CSV')
@click.option('--ledger', is_flag=True, help='Export the run ledger instead of a record')
@click.pass_context
def export(ctx, record, csv_out, ledger):
    """Export a record file, or the run ledger, as CSV"""
    if record is None and not ledger:
        raise click.UsageError("Give a record file or --ledger")

    def action(pipeline: ExperimentPipeline):
        if ledger:
            path = csv_out or pipeline.out_dir / 'ledger.csv'
            return pipeline.ledger.export_csv(path, all_runs=True)
        return pipeline.export(record, csv_out)

    path = _run(ctx, 'export', action, lambda: _pipeline(ctx))
    print_success(f"Exported to {path}")


def main():
    """Main entry point"""
    cli(obj={})


if __name__ == "__main__":
    main()
