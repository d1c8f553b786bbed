"""Equilibrium thresholds and expected utilities for small committees.

Run: python demos/equilibrium_tables.py
"""
from liquidvote.equilibrium import solve
from liquidvote.model import ContinuousUniform, Electorate

law = ContinuousUniform(0.5, 0.7)

for system in ("LD", "MVA"):
    print(f"\n{system}")
    print(f"{'N':>4} {'K':>3} {'threshold':>10} {'mass below':>11} {'EU':>7} {'EU_MV':>7}")
    for n, k in ((3, 1), (5, 1), (15, 3)):
        report = solve(system, Electorate(n, k, 0.7), law)
        for eq in report.interior_thresholds:
            print(f"{n:>4} {k:>3} {eq.threshold:>10.4f} {eq.mass_below:>11.3f} "
                  f"{eq.ex_ante_eu:>7.4f} {report.eu_mv_baseline:>7.4f}")
        for b in report.boundary_equilibria:
            tag = "equilibrium" if b.is_equilibrium else f"deviation gain {b.deviation_gain:.4f}"
            print(f"{n:>4} {k:>3} {b.threshold:>10.4f} {'boundary':>11} {b.ex_ante_eu:>7.4f}  {tag}")
