"""How ex-ante utility moves as everyone shifts to a common threshold.

Run: python demos/robustness_sweep.py
"""
from liquidvote.equilibrium import parse_grid, robustness_sweep
from liquidvote.model import ContinuousUniform, Electorate

law = ContinuousUniform(0.5, 0.7)
grid = parse_grid("0.5:0.7:0.002")

for system in ("LD", "MVA"):
    for el in (Electorate(5, 1, 0.7), Electorate(15, 3, 0.7)):
        curve = robustness_sweep(system, el, law, grid)
        print(f"{system}{el.n_total:<3} peak at {curve.peak:.3f}, best ratio {max(curve.eu_ratio):.4f}, "
              f"worst ratio {min(curve.eu_ratio):.4f}, loss/gain {curve.loss_gain_ratio():.2f}")
