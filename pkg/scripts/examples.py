#!/usr/bin/env python3
"""
Example usage of the simulator components
This demonstrates how each component works independently
"""

import sys
import tempfile
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

print("=" * 60)
print("MB-NLA Simulator - Component Examples")
print("=" * 60)

# Example 1: Gaussian states
print("\n1. Gaussian State Example")
print("-" * 60)
from gaussian.gaussian import apply_loss, make_tmsv, symplectic_eigenvalues, von_neumann_entropy

state = make_tmsv(0.5)
lossy = apply_loss(state, 'B', 0.5)
print(f"State: {lossy.describe()}")
print(f"Symplectic eigenvalues: {symplectic_eigenvalues(lossy.cm)}")
print(f"Entropy: {von_neumann_entropy(lossy.cm):.4f} bits")

# Example 2: Ideal amplification
print("\n2. Noiseless Linear Amplification Example")
print("-" * 60)
from nla.nla import FilterSpec, analytic_nla, apply_mbnla, choose_cutoff, gain_bound
from criteria.criteria import criteria_from_state

print(f"Gain bound: {gain_bound(lossy):.4f}")
for g in (1.0, 1.2, 1.4):
    report = criteria_from_state(analytic_nla(lossy, g))
    print(f"  g={g:g}: E_dir={report.e_direct:.4f} E_rev={report.e_reverse:.4f} I={report.duan_i:.4f}")

# Example 3: Sampling and post-selection
print("\n3. Monte Carlo Example")
print("-" * 60)
from measurement.measurement import sample_shots
from criteria.criteria import criteria_from_cm, reconstruct_cm

record = sample_shots(lossy, 200_000, seed=1)
spec = FilterSpec(1.2, choose_cutoff(lossy, 3.0, g_max=1.2))
outcome = apply_mbnla(record, spec, seed=1)
print(f"Accepted {outcome.n_accept}/{outcome.n_in} shots (p_success={outcome.p_success:.4f})")
measured = criteria_from_cm(reconstruct_cm(outcome.record).cm)
print(f"Measured E_dir={measured.e_direct:.4f} I={measured.duan_i:.4f}")

# Example 4: Key rate
print("\n4. Key Rate Example")
print("-" * 60)
from gaussian.gaussian import to_snu
from qkd.qkd import key_rate

rate = key_rate(to_snu(analytic_nla(lossy, 1.4).cm))
print(f"I(A:B)={rate.i_ab:.4f} S(A:E)={rate.s_ae:.4f} K={rate.k:.4f}")

# Example 5: Record files and reports
print("\n5. Storage and Reporter Example")
print("-" * 60)
from storage.record_file import read_record, write_record
from reporter.reporter import ReportWriter

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / 'example.mbnl'
    digest = write_record(path, outcome.record)
    print(f"Wrote {len(outcome.record)} shots, payload digest {digest[:16]}...")
    print(f"Read back {len(read_record(path))} shots")

    reporter = ReportWriter('example_run', tmp)
    report = reporter.build_report('criteria', {'statistics': measured.to_dict()})
    print("\nReport Summary:")
    print(reporter.generate_text_summary(report))

print("\n" + "=" * 60)
print("All component examples completed successfully!")
print("=" * 60)
