"""Acceptance criteria, one marked group per criterion.

The terminal summary prints one PASS/FAIL line per criterion number.
"""
import time

import numpy as np
import pytest

import oracle
from liquidvote.analysis import bootstrap_exp1, conditional_differential, generate_synthetic
from liquidvote.analytic import eu_a_mva, eu_d_ld, eu_mv, eu_nd_ld, eu_v_mva, ex_ante_eu_ld, ex_ante_eu_mva
from liquidvote.cli import main
from liquidvote.engine import resolve_acyclic, resolve_delegations, vector_targets
from liquidvote.equilibrium import (
    check_boundary_equilibria,
    parse_grid,
    robustness_sweep,
    solve,
    solve_interior_ld,
    solve_interior_mva,
)
from liquidvote.model import (
    Action,
    ContinuousUniform,
    Electorate,
    Empirical,
    StrategyProfileLD,
    StrategyProfileMVA,
)
from liquidvote.montecarlo import AccuracyPopulation, PopulationBehavior, compare_systems, simulate_batch

U = ContinuousUniform(0.5, 0.7)
EL3, EL5, EL15 = Electorate(3, 1, 0.7), Electorate(5, 1, 0.7), Electorate(15, 3, 0.7)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# 1 -----------------------------------------------------------------------


@criterion(1, "delegation table: thresholds, EU and EU_MV at N=5 and N=15")
def test_c01_delegation_table():
    start = time.perf_counter()
    for el, q, eu, mv in ((EL5, 0.543, 0.731, 0.717), (EL15, 0.532, 0.843, 0.832)):
        roots = solve_interior_ld(el, U)
        assert len(roots) == 1 and abs(roots[0] - q) <= 0.002
        assert abs(ex_ante_eu_ld(StrategyProfileLD(roots[0]), el, U) - eu) <= 0.001
        assert abs(eu_mv(el, U) - mv) <= 0.001
    assert time.perf_counter() - start < 5


# 2 -----------------------------------------------------------------------


@criterion(2, "abstention table: thresholds, EU values and boundary rows")
def test_c02_abstention_table():
    start = time.perf_counter()
    expected = {5: (0.724, 0.717, 0.7), 15: (0.849, 0.832, 0.784)}
    for el in (EL5, EL15):
        report = solve("MVA", el, U)
        assert len(report.interior_thresholds) == 1
        inner = report.interior_thresholds[0]
        assert abs(inner.threshold - 0.580) <= 0.002
        interior_eu, low_eu, high_eu = expected[el.n_total]
        assert abs(inner.ex_ante_eu - interior_eu) <= 0.001
        bounds = {b.threshold: b for b in report.boundary_equilibria}
        # three equilibrium rows per size: everyone votes, interior, nobody votes
        assert bounds[0.5].is_equilibrium and abs(bounds[0.5].ex_ante_eu - low_eu) <= 0.001
        assert bounds[0.7].is_equilibrium and abs(bounds[0.7].ex_ante_eu - high_eu) <= 0.001
    assert time.perf_counter() - start < 5


# 3 -----------------------------------------------------------------------


@criterion(3, "three-voter example: threshold 0.572 and delegation share 0.36")
def test_c03_three_voters():
    roots = solve_interior_ld(EL3, U)
    assert len(roots) == 1 and abs(roots[0] - 0.572) <= 0.001
    assert abs(U.cdf(roots[0]) - 0.36) <= 0.01


# 4 -----------------------------------------------------------------------


@criterion(4, "robustness sweep: MV start, peaks at equilibria, LD3 loss/gain > 6")
def test_c04_sweep_start_and_peaks():
    start = time.perf_counter()
    step = 0.002
    grid = parse_grid(f"0.5:0.7:{step}")
    for system, solver in (("LD", solve_interior_ld), ("MVA", solve_interior_mva)):
        for el in (EL5, EL15):
            curve = robustness_sweep(system, el, U, grid)
            assert abs(curve.eu_ratio[0] - 1.0) <= 1e-9
            assert abs(curve.peak - solver(el, U)[0]) <= step
    assert time.perf_counter() - start < 30


@criterion(4, "robustness sweep: MV start, peaks at equilibria, LD3 loss/gain > 6")
def test_c04_ld3_loss_gain_ratio():
    curve = robustness_sweep("LD", EL15, U, parse_grid("0.5:0.7:0.002"))
    ratio = curve.loss_gain_ratio()
    print(f"LD3 max loss / max gain = {ratio:.3f}")
    assert ratio > 6


# 5 -----------------------------------------------------------------------


GRID5 = [0.5, 0.55, 0.6, 0.65, 0.7]


@criterion(5, "oracle equivalence of EUND/EUD/EUV/EUA on a 5-point grid")
@pytest.mark.parametrize("n,k", [(3, 1), (5, 1), (5, 3)])
def test_c05_oracle_equivalence(n, k):
    el = Electorate(n, k, 0.7)
    laws = [(("uniform", 0.5, 0.7), U), (oracle.atoms_law(GRID5), Empirical(tuple((q, 0.2) for q in GRID5)))]
    worst = 0.0
    for oracle_law, law in laws:
        for t in GRID5:
            ld, mva = StrategyProfileLD(t), StrategyProfileMVA(t)
            pairs = [(eu_d_ld(ld, el, law), oracle.interim("LD", n, k, 0.7, oracle_law, t, "out")),
                     (eu_a_mva(mva, el, law), oracle.interim("MVA", n, k, 0.7, oracle_law, t, "out"))]
            for q in GRID5:
                pairs.append((eu_nd_ld(q, ld, el, law), oracle.interim("LD", n, k, 0.7, oracle_law, t, q)))
                pairs.append((eu_v_mva(q, mva, el, law), oracle.interim("MVA", n, k, 0.7, oracle_law, t, q)))
            worst = max(worst, max(abs(a - b) for a, b in pairs))
    assert worst <= 1e-10


# 6 -----------------------------------------------------------------------


EQUILIBRIA = [
    ("LD", EL5, 0.543), ("LD", EL5, 0.7), ("LD", EL15, 0.532),
    ("MVA", EL5, 0.5), ("MVA", EL5, 0.580), ("MVA", EL5, 0.7),
    ("MVA", EL15, 0.5), ("MVA", EL15, 0.580), ("MVA", EL15, 0.7),
]


@criterion(6, "10^6 simulated elections at each equilibrium within 3 s.e.")
@pytest.mark.parametrize("system,el,t", EQUILIBRIA, ids=[f"{s}{e.n_total}-{t}" for s, e, t in EQUILIBRIA])
def test_c06_monte_carlo_consistency(system, el, t):
    if system == "LD":
        t = solve_interior_ld(el, U)[0] if t < 0.7 else t
        prof, exact = StrategyProfileLD(t), ex_ante_eu_ld(StrategyProfileLD(t), el, U)
    else:
        t = solve_interior_mva(el, U)[0] if 0.5 < t < 0.7 else t
        prof, exact = StrategyProfileMVA(t), ex_ante_eu_mva(StrategyProfileMVA(t), el, U)
    start = time.perf_counter()
    res = simulate_batch(system, el, U, prof, 10 ** 6, seed=2024, threads=16)
    assert time.perf_counter() - start < 60
    assert abs(res.freq_correct - exact) <= 3 * res.std_error


# 7 -----------------------------------------------------------------------


@criterion(7, "cycle mechanics: uniform link choice, coin toss, vote conservation")
def test_c07_broken_link_frequencies():
    # experts 0 (z) and 1; non-experts 2 (i) and 3 (j) delegate to z, z to i
    is_expert = [True, True, False, False, False]
    actions = [Action.DELEGATE_NONEXPERT, Action.VOTE, Action.DELEGATE_EXPERT, Action.DELEGATE_EXPERT, Action.VOTE]
    targets = [2, -1, 0, 0, -1]
    rng = np.random.default_rng(8)
    counts = {0: 0, 2: 0, 3: 0}
    runs = 10 ** 5
    for _ in range(runs):
        res = resolve_delegations(is_expert, actions, targets=targets, rng=rng)
        counts[res.trace[0][0]] += 1
    for c in counts.values():
        assert abs(c / runs - 1 / 3) <= 0.01


@criterion(7, "cycle mechanics: uniform link choice, coin toss, vote conservation")
def test_c07_all_cycle_coin_toss():
    el = Electorate(3, 3, 0.7)
    prof = StrategyProfileLD(0.0, expert_prob_delegate_expert=1.0)
    res = simulate_batch("LD", el, U, prof, 10 ** 5, seed=5)
    assert res.n_all_cycle == res.n_elections
    assert abs(res.freq_correct - 0.5) <= 0.005


@criterion(7, "cycle mechanics: uniform link choice, coin toss, vote conservation")
def test_c07_vote_conservation():
    rng = np.random.default_rng(77)
    total = 0
    for N, K, n in ((5, 1, 250_000), (5, 3, 250_000), (7, 3, 250_000), (15, 3, 250_000)):
        for start in range(0, n, 50_000):
            m = min(50_000, n - start)
            action = rng.integers(0, 3, (m, N)).astype(np.int8)
            if K == 1:
                action[:, 0][action[:, 0] == Action.DELEGATE_EXPERT] = Action.VOTE
            target = vector_targets(action, rng.random((m, N)), K)
            weights, cyclic = resolve_acyclic(target)
            ok = weights.sum(axis=1) == N
            ok[cyclic] = True
            assert ok.all()
            assert np.all(weights[action != Action.VOTE] == 0)
            is_expert = np.arange(N) < K
            for i in cyclic:
                r = resolve_delegations(is_expert, action[i], targets=target[i], rng=rng)
                assert r.all_cycle or (r.weights.sum() == N and np.all(r.weights[action[i] != Action.VOTE] == 0))
            total += m
    assert total == 10 ** 6


# 8 -----------------------------------------------------------------------


@criterion(8, "bootstrap on synthetic equilibrium data matches analytic EU; gamma identity")
def test_c08_bootstrap_pipeline():
    data = generate_synthetic("LD", EL5, U, StrategyProfileLD(0.543), n_sessions=400, seed=1)
    dist = bootstrap_exp1(data, "LD", 5, reps=10 ** 4, seed=1)
    exact = ex_ante_eu_ld(StrategyProfileLD(0.543), EL5, U)
    print(f"bootstrap mean {dist.freq_correct.mean():.4f} vs analytic {exact:.4f}")
    assert abs(dist.freq_correct.mean() - exact) <= 0.01
    assert np.all(dist.n_disagree_system_correct + dist.n_disagree_mv_correct == dist.n_disagree)
    live = dist.n_disagree > 0
    gamma_sys = dist.n_disagree_system_correct[live] / dist.n_disagree[live]
    gamma_mv = dist.n_disagree_mv_correct[live] / dist.n_disagree[live]
    assert np.allclose(gamma_mv, 1 - gamma_sys, rtol=0, atol=1e-12)
    assert np.allclose(dist.differential[live], 2 * gamma_sys - 1)
    assert np.all(np.isnan(dist.differential[~live]))
    pairs = [(1, 0)] * 21 + [(0, 1)] * 29 + [(1, 1)] * 10
    assert conditional_differential(pairs) == pytest.approx(-0.16)


# 9 -----------------------------------------------------------------------


@criterion(9, "N=125 calibrated population: 10^4 reps in < 2 min, all systems in [0.85, 1]")
@pytest.mark.parametrize("coherence", [0.05, 0.03])
def test_c09_large_groups(coherence):
    start = time.perf_counter()
    comp = compare_systems(AccuracyPopulation.calibrated(coherence), sizes=(125,), behavior=PopulationBehavior(),
                           reps=10 ** 4, seed=7, threads=16)
    assert time.perf_counter() - start < 120
    by = {r.system: r.freq_correct for r in comp.rows}
    print(f"coherence {coherence}: " + ", ".join(f"{s} {v:.3f}" for s, v in by.items()))
    for value in by.values():
        assert 0.85 <= value <= 1.0


# 10 ----------------------------------------------------------------------


def _command_outputs(tmp_path, name, argv, threads):
    out = tmp_path / f"{name}-{threads}"
    assert main([*argv, "--threads", str(threads), "--out", str(out)]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@criterion(10, "seeded commands are byte-identical at 1, 4 and 16 threads")
def test_c10_determinism(tmp_path):
    syn = tmp_path / "syn"
    assert main(["gen-synthetic", "--system", "ld", "--n", "5", "--k", "1", "--threshold", "0.543",
                 "--sessions", "30", "--seed", "3", "--out", str(syn)]) == 0
    data = str(syn / "synthetic.csv")
    commands = {
        "simulate": ["simulate", "--system", "ld", "--n", "15", "--k", "3", "--threshold", "0.6",
                     "--reps", "200000", "--seed", "11"],
        "simulate-noisy": ["simulate", "--system", "mva", "--n", "5", "--k", "1", "--threshold-law",
                           "binned:0.5:0.7:0.05", "--against", "0.1", "--reps", "100000", "--seed", "12"],
        "compare": ["compare", "--sizes", "5,15,125", "--reps", "20000", "--seed", "13"],
        "bootstrap": ["bootstrap", "--input", data, "--system", "ld", "--reps", "2000", "--seed", "14"],
    }
    for name, argv in commands.items():
        base = _command_outputs(tmp_path, name, argv, 1)
        for threads in (4, 16):
            assert _command_outputs(tmp_path, name, argv, threads) == base, (name, threads)
    # commands without a thread option are still replayed byte for byte
    for name, argv in {"analyze": ["analyze", "--input", data, "--permutations", "499", "--seed", "15"],
                       "gen": ["gen-synthetic", "--system", "mva", "--n", "15", "--k", "3", "--threshold", "0.58",
                               "--sessions", "5", "--seed", "16"]}.items():
        runs = []
        for i in range(2):
            out = tmp_path / f"{name}-{i}"
            assert main([*argv, "--out", str(out)]) == 0
            runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert runs[0] == runs[1]
