"""Delegation, abstention and plain majority on a heterogeneous population.

Run: python demos/population_comparison.py [reps]
"""
import sys

from liquidvote.montecarlo import AccuracyPopulation, PopulationBehavior, compare_systems

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000

for coherence in (0.05, 0.03):
    comp = compare_systems(AccuracyPopulation.calibrated(coherence), sizes=(5, 15, 125),
                           behavior=PopulationBehavior(), reps=reps, seed=1)
    print(f"\ncoherence {coherence}")
    for row in comp.rows:
        print(f"  N={row.n_total:<4} {row.system:<4} {row.freq_correct:.3f}")
    print("  share of replications with MV >= MVA >= LD:", comp.ordering_frequency)
