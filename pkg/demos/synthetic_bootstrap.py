"""Generate equilibrium play, then bootstrap group decisions from it.

Run: python demos/synthetic_bootstrap.py
"""
from liquidvote.analysis import bootstrap_exp1, frequency_summary, generate_synthetic
from liquidvote.analytic import ex_ante_eu_ld
from liquidvote.model import ContinuousUniform, Electorate, StrategyProfileLD

law = ContinuousUniform(0.5, 0.7)
el = Electorate(5, 1, 0.7)
profile = StrategyProfileLD(0.543)

data = generate_synthetic("LD", el, law, profile, n_sessions=100, seed=1)
for row in frequency_summary(data, "session"):
    print(f"delegation frequency {row.frequency:.3f} (s.e. {row.std_error:.3f}, {row.n_clusters} sessions)")

dist = bootstrap_exp1(data, "LD", 5, reps=5000, seed=2)
summary = dist.summary()
print(f"bootstrap mean correctness {dist.freq_correct.mean():.4f}, "
      f"analytic {ex_ante_eu_ld(profile, el, law):.4f}")
for key in ("differential_mean", "differential_mode", "mass_below_zero"):
    if key in summary:
        print(f"{key}: {summary[key]:.3f}")
