"""Recovery rate against the number of measurements.

The default grid (m = 50..600) sits entirely above the transition for
n=20, d=2, s*=5, so this demo also runs a low grid where the rate climbs.
Tables go to demos/output/ as CSV for external plotting.

Run: python demos/05_phase_transition.py
"""

from pathlib import Path

from spectral_search.experiments import PhaseConfig, phase_transition, write_table

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
for name, grid in (("low", (10, 15, 20, 25, 30, 40, 60)), ("default", tuple(range(50, 601, 50)))):
    res = phase_transition(PhaseConfig(m_grid=grid, trials=30, seed=0))
    write_table(out / f"phase_{name}.csv", res.rows, meta={"seed": 0})
    print(f"{name} grid (trend ok: {res.trend_ok}):")
    for r in res.rows:
        print(f"  m={r.m:>4}  success {r.success_rate:5.2f}  {'#' * round(30 * r.success_rate)}")
print(f"reference m with constant 1 (shape only): {res.reference_m:.0f} of {res.columns} columns")
