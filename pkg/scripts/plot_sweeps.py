#!/usr/bin/env python3
"""
Plot Sweeps
Render the success, loss and key-rate sweep tables written by `main.py sweep` as PNG figures
"""

import sys
import argparse
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def _errorbars(frame: pd.DataFrame, name: str):
    low, high = f"{name}_low", f"{name}_high"
    if low not in frame or frame[low].isna().all():
        return None
    return np.vstack([frame[name] - frame[low], frame[high] - frame[name]])


def plot_success(frame: pd.DataFrame, ax):
    """Witnesses against post-selection success probability"""
    for name, label in (('e_direct', 'E (direct)'), ('e_reverse', 'E (reverse)'), ('duan_i', 'I')):
        ax.errorbar(frame['p_success'], frame[name], yerr=_errorbars(frame, name), fmt='o',
                    capsize=3, label=label)
        ax.plot(frame['analytic_p_success'], frame[f"analytic_{name}"], '-', alpha=0.6)
    ax.set_xscale('log')
    ax.set_xlabel('success probability')
    ax.set_ylabel('witness (SNU)')
    ax.axhline(1.0, color='grey', lw=0.8, ls='--')
    ax.legend()


def plot_loss(frame: pd.DataFrame, ax):
    """Inseparability against transmissivity, one curve per gain"""
    for gain, group in frame.groupby('gain'):
        ax.plot(group['T'], group['duan_i'], 'o-', label=f"g = {gain:g}")
    bound = frame.drop_duplicates('T').sort_values('T')
    ax.plot(bound['T'], bound['perfect_epr_bound'], 'k--', label='perfect EPR')
    ax.set_xscale('log')
    ax.set_xlabel('transmissivity T')
    ax.set_ylabel('I')
    ax.legend()


def plot_keyrate(frame: pd.DataFrame, ax):
    """Key rate against gain"""
    frame = frame[frame['error'].fillna('') == '']
    if 'k_low' in frame and frame['k_low'].notna().any():
        yerr = np.vstack([frame['k'] - frame['k_low'], frame['k_high'] - frame['k']])
        ax.errorbar(frame['gain'], frame['k'], yerr=yerr, fmt='o', capsize=3)
    else:
        ax.plot(frame['gain'], frame['k'], 'o-')
    ax.axhline(0.0, color='grey', lw=0.8, ls='--')
    ax.set_xlabel('gain g')
    ax.set_ylabel('K (bits per use)')


def main():
    parser = argparse.ArgumentParser(description='Plot MB-NLA sweep tables')
    parser.add_argument('directory', help='Directory holding <run_id>_{success,loss,keyrate}_table.csv')
    parser.add_argument('--run-id', default=None, help='Run identifier (latest run when omitted)')
    args = parser.parse_args()

    directory = Path(args.directory)
    plotters = {'success_table': plot_success, 'loss_table': plot_loss, 'keyrate_table': plot_keyrate}
    prefix = args.run_id or '*'
    tables = {}
    for name in plotters:
        matches = sorted(directory.glob(f"{prefix}_{name}.csv"))
        if matches:
            tables[name] = matches[-1]
    if not tables:
        print(f"No sweep tables found in {directory}")
        return 1

    for name, path in tables.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        plotters[name](pd.read_csv(path), ax)
        fig.tight_layout()
        out = path.with_suffix('.png')
        fig.savefig(out, dpi=150)
        plt.close(fig)
        print(f"Saved {out}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
