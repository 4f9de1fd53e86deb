"""
End to end: MSE-versus-power curves
===================================

The harness runs the whole pipeline over seeded trials and writes CSV
curves. This script runs a reduced version of all three figures in
memory and prints them; ``twrelay --figure N`` produces the full runs.
"""

from twrelay.harness import figure_spec, run_experiment

for fig, targets in ((1, ("backward",)), (2, ("composite", "forward"))):
    recs = run_experiment(figure_spec(fig, snr_db=(0.0, 10.0, 20.0, 30.0), trials=200, targets=targets))
    print(f"\nfigure {fig}")
    for r in sorted(recs, key=lambda r: (r.target, r.scheme, r.estimator, r.snr_db)):
        print(f"  {r.target:9s} {r.scheme:11s} {r.estimator:8s} {r.snr_db:5.1f} dB  "
              f"{r.mse_mean:.3e} +/- {r.mse_stderr:.1e}")
