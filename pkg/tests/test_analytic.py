import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import oracle
from liquidvote.analytic import (
    eu_a_mva,
    eu_d_ld,
    eu_mv,
    eu_nd_ld,
    eu_v_mva,
    ex_ante_curve,
    ex_ante_eu_ld,
    ex_ante_eu_mva,
)
from liquidvote.model import (
    ContinuousUniform,
    DiscreteBinned,
    Electorate,
    Empirical,
    StrategyProfileLD,
    StrategyProfileMVA,
)

U = ContinuousUniform(0.5, 0.7)
EL5 = Electorate(5, 1, 0.7)
EL15 = Electorate(15, 3, 0.7)


def _grid_law(grid):
    return Empirical(tuple((q, 1 / len(grid)) for q in grid))


def _interim(case):
    el = Electorate(case["n"], case["k"], 0.7)
    t, focal = case["threshold"], case["focal"]
    if case["system"] == "LD":
        prof = StrategyProfileLD(t)
        return eu_d_ld(prof, el, U) if focal == "out" else eu_nd_ld(focal, prof, el, U)
    prof = StrategyProfileMVA(t)
    return eu_a_mva(prof, el, U) if focal == "out" else eu_v_mva(focal, prof, el, U)


def test_interim_matches_frozen_oracle(frozen):
    cases = [c for c in frozen["cases"] if c["kind"] == "interim"]
    assert len(cases) > 300
    worst = max(abs(_interim(c) - c["value"]) for c in cases)
    assert worst < 1e-10


def test_ex_ante_matches_frozen_oracle(frozen):
    law = _grid_law(frozen["grid"])
    for c in (c for c in frozen["cases"] if c["kind"] == "ex_ante"):
        el = Electorate(c["n"], c["k"], 0.7)
        fn = ex_ante_eu_ld if c["system"] == "LD" else ex_ante_eu_mva
        prof = StrategyProfileLD(c["threshold"]) if c["system"] == "LD" else StrategyProfileMVA(c["threshold"])
        assert fn(prof, el, law) == pytest.approx(c["value"], abs=1e-10)


def test_mv_matches_frozen_oracle(frozen):
    for c in (c for c in frozen["cases"] if c["kind"] == "mv"):
        el = Electorate(c["n"], c["k"], 0.7)
        assert eu_mv(el, Empirical.point_mass(c["mean"])) == pytest.approx(c["value"], abs=1e-12)


def test_convolution_equals_nested_multinomial_sum(frozen):
    for c in (c for c in frozen["cases"] if c["kind"] == "nested"):
        el = Electorate(c["m"] + 3, 3, 0.7)
        prof = StrategyProfileLD(c["threshold"])
        got = eu_d_ld(prof, el, U) if c["focal"] == "out" else eu_nd_ld(c["focal"], prof, el, U)
        assert got == pytest.approx(c["value"], abs=1e-10)


@pytest.mark.parametrize("system,n,k,t,focal", [
    ("LD", 3, 1, 0.6, 0.62), ("LD", 5, 3, 0.55, "out"), ("MVA", 3, 1, 0.6, "out"), ("MVA", 5, 1, 0.52, 0.69),
])
def test_oracle_still_reproduces_frozen(frozen, system, n, k, t, focal):
    value = oracle.interim(system, n, k, 0.7, ("uniform", 0.5, 0.7), t, focal)
    match = [c for c in frozen["cases"] if c["kind"] == "interim" and c["system"] == system
             and c["n"] == n and c["k"] == k and c["threshold"] == pytest.approx(t)
             and c["focal"] == focal]
    if match:
        assert value == match[0]["value"]
    assert _interim(dict(system=system, n=n, k=k, threshold=t, focal=focal)) == pytest.approx(value, abs=1e-10)


def test_table_values():
    assert eu_mv(EL5, U) == pytest.approx(0.717, abs=1e-3)
    assert eu_mv(EL15, U) == pytest.approx(0.832, abs=1e-3)
    assert eu_mv(Electorate(1, 1, 0.7), U) == pytest.approx(0.7)
    assert ex_ante_eu_ld(StrategyProfileLD(0.543), EL5, U) == pytest.approx(0.731, abs=1e-3)
    assert ex_ante_eu_ld(StrategyProfileLD(0.532), EL15, U) == pytest.approx(0.843, abs=1e-3)
    assert eu_d_ld(StrategyProfileLD(0.7), EL5, U) == pytest.approx(0.7)
    assert ex_ante_eu_mva(StrategyProfileMVA(0.58), EL5, U) == pytest.approx(0.724, abs=1e-3)
    assert ex_ante_eu_mva(StrategyProfileMVA(0.58), EL15, U) == pytest.approx(0.849, abs=1e-3)
    p = 0.7
    assert eu_a_mva(StrategyProfileMVA(0.7), EL15, U) == pytest.approx(p ** 3 + 3 * p ** 2 * (1 - p))
    assert eu_a_mva(StrategyProfileMVA(0.7), EL5, U) == pytest.approx(0.7)


def test_indifference_points():
    el3 = Electorate(3, 1, 0.7)
    prof = StrategyProfileLD(0.572)
    assert eu_nd_ld(0.572, prof, el3, U) - eu_d_ld(prof, el3, U) == pytest.approx(0, abs=1e-3)
    prof = StrategyProfileMVA(0.580)
    assert eu_v_mva(0.58, prof, EL5, U) - eu_a_mva(prof, EL5, U) == pytest.approx(0, abs=1e-3)


def test_ex_ante_matches_quadrature():
    for el, t in ((EL5, 0.543), (EL15, 0.532), (Electorate(7, 3, 0.7), 0.61)):
        prof = StrategyProfileLD(t)
        integrand = integrate.quad(lambda q: eu_nd_ld(q, prof, el, U) / 0.2, t, 0.7, epsabs=1e-12)[0]
        direct = U.cdf(t) * eu_d_ld(prof, el, U) + integrand
        assert ex_ante_eu_ld(prof, el, U) == pytest.approx(direct, abs=1e-9)
        prof = StrategyProfileMVA(t)
        integrand = integrate.quad(lambda q: eu_v_mva(q, prof, el, U) / 0.2, t, 0.7, epsabs=1e-12)[0]
        assert ex_ante_eu_mva(prof, el, U) == pytest.approx(U.cdf(t) * eu_a_mva(prof, el, U) + integrand,
                                                            abs=1e-9)


@pytest.mark.parametrize("dist", [U, DiscreteBinned(0.5, 0.7, 0.01)])
@pytest.mark.parametrize("n,k", [(3, 1), (5, 1), (15, 3), (25, 5)])
def test_boundary_identities(dist, n, k):
    el = Electorate(n, k, 0.7)
    base = eu_mv(el, dist)
    assert ex_ante_eu_ld(StrategyProfileLD(dist.lo), el, dist) == pytest.approx(base, abs=1e-12)
    assert ex_ante_eu_mva(StrategyProfileMVA(dist.lo), el, dist) == pytest.approx(base, abs=1e-12)
    if k == 1:
        assert ex_ante_eu_ld(StrategyProfileLD(1.0), el, dist) == pytest.approx(0.7, abs=1e-12)


def test_full_delegation_differs_from_full_abstention_with_three_experts():
    ld = ex_ante_eu_ld(StrategyProfileLD(1.0), EL15, U)
    mva = eu_a_mva(StrategyProfileMVA(1.0), EL15, U)
    assert ld == pytest.approx(0.76726, abs=1e-5)
    assert abs(ld - mva) > 0.01


def test_canonical_only():
    with pytest.raises(ValueError):
        eu_nd_ld(0.6, StrategyProfileLD(0.6, 0.2, 0.3), EL5, U)
    with pytest.raises(ValueError):
        ex_ante_eu_ld(StrategyProfileLD(0.6, expert_prob_delegate_expert=0.1), EL15, U)


@settings(deadline=None, max_examples=60)
@given(k_half=st.integers(0, 2), extra=st.integers(1, 6), p=st.floats(0.71, 0.95),
       t=st.floats(0.5, 0.7), q1=st.floats(0.5, 0.7), q2=st.floats(0.5, 0.7))
def test_interim_monotone_in_own_precision(k_half, extra, p, t, q1, q2):
    k = 2 * k_half + 1
    el = Electorate(k + 2 * extra, k, p)
    lo, hi = sorted((q1, q2))
    assert eu_nd_ld(lo, StrategyProfileLD(t), el, U) <= eu_nd_ld(hi, StrategyProfileLD(t), el, U) + 1e-14
    assert eu_v_mva(lo, StrategyProfileMVA(t), el, U) <= eu_v_mva(hi, StrategyProfileMVA(t), el, U) + 1e-14


@settings(deadline=None, max_examples=40)
@given(t=st.floats(0.5, 0.7), k_half=st.integers(0, 2), extra=st.integers(1, 6))
def test_utilities_are_probabilities_above_one_half(t, k_half, extra):
    k = 2 * k_half + 1
    el = Electorate(k + 2 * extra, k, 0.7)
    for value in (ex_ante_eu_ld(StrategyProfileLD(t), el, U), ex_ante_eu_mva(StrategyProfileMVA(t), el, U),
                  eu_d_ld(StrategyProfileLD(t), el, U), eu_a_mva(StrategyProfileMVA(t), el, U)):
        assert 0.5 <= value <= 1.0


def test_curve_is_vectorised_version():
    grid = np.linspace(0.5, 0.7, 11)
    curve = ex_ante_curve("LD", EL15, U, grid)
    single = [ex_ante_eu_ld(StrategyProfileLD(t), EL15, U) for t in grid]
    assert curve == pytest.approx(single, abs=1e-14)
