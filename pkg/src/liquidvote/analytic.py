"""Exact expected utilities for LD, MVA and MV.

All quantities are probabilities that the group decision matches the state.
Interim values condition on a focal non-expert's own precision ``q_i``;
ex-ante values integrate over it.

The nested multinomial sums over how delegated votes are split across
experts collapse to a binomial: given ``c_e`` correct experts, each delegated
vote independently lands on a correct expert with probability ``c_e / K``.
The number of correct votes is then a convolution of binomials, which is
what the helpers below build.  Everything is vectorised over thresholds so
the equilibrium scan can evaluate whole grids at once.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .model import (
    Electorate,
    PrecisionDistribution,
    StrategyProfileLD,
    StrategyProfileMVA,
)


def _pmf(n: int, prob) -> np.ndarray:
    """Binomial pmf over ``0..n`` for each entry of ``prob`` (shape ``prob.shape + (n+1,)``)."""
    prob = np.asarray(prob, dtype=float)
    k = np.arange(n + 1)
    return binom.pmf(k, n, prob[..., None])


@lru_cache(maxsize=4096)
def _expert_block(n_experts: int, p: float, n_delegated: int) -> np.ndarray:
    """Distribution of correct votes controlled by the experts.

    Experts each hold one vote plus whatever delegated votes they received;
    ``n_delegated`` votes are assigned to experts uniformly at random.
    """
    out = np.zeros(n_experts + n_delegated + 1)
    expert_pmf = _pmf(n_experts, p)
    for c_e in range(n_experts + 1):
        landed = _pmf(n_delegated, c_e / n_experts)
        out[c_e:c_e + n_delegated + 1] += expert_pmf[c_e] * landed
    out.setflags(write=False)
    return out


def _add_convolved(acc: np.ndarray, weight: np.ndarray, left: np.ndarray, right: np.ndarray) -> None:
    """``acc[g, :] += weight[g] * (left[g, :] * right)`` (full convolution)."""
    for c in range(left.shape[1]):
        acc[:, c:c + right.size] += (weight * left[:, c])[:, None] * right


def _threshold_state(dist: PrecisionDistribution, threshold):
    participate, mean_vote = dist.upper_tail(np.asarray(threshold, dtype=float))
    return np.atleast_1d(np.asarray(participate, float)), np.atleast_1d(np.asarray(mean_vote, float))


def ld_components(el: Electorate, participate, mean_vote):
    """Return ``(base, slope, eud)`` with ``EUND(q_i) = base + q_i * slope``.

    ``participate`` is the probability that another non-expert votes
    (``1 - F(threshold)``) and ``mean_vote`` the expected precision of a
    non-expert who votes.  Both may be arrays of the same shape.
    """
    participate = np.atleast_1d(np.asarray(participate, dtype=float))
    mean_vote = np.atleast_1d(np.asarray(mean_vote, dtype=float))
    n, k, m = el.n_total, el.n_experts, el.n_nonexperts
    others = m - 1
    nd = np.zeros((participate.size, n + 1))
    dd = np.zeros((participate.size, n + 1))
    voting_pmf = _pmf(others, participate)
    for z in range(others + 1):
        w = voting_pmf[:, z]
        correct_nonexperts = _pmf(z, mean_vote)
        _add_convolved(nd, w, correct_nonexperts, _expert_block(k, el.expert_precision, others - z))
        _add_convolved(dd, w, correct_nonexperts, _expert_block(k, el.expert_precision, others - z + 1))
    half = (n - 1) // 2
    base = nd[:, half + 1:].sum(axis=1)
    slope = nd[:, half]
    eud = dd[:, half + 1:].sum(axis=1)
    return base, slope, eud


def mva_components(el: Electorate, participate, mean_vote):
    """Return ``(base, slope, eua)`` with ``EUV(q_i) = base + q_i * slope``.

    Exact ties among cast votes are broken by a fair coin.
    """
    participate = np.atleast_1d(np.asarray(participate, dtype=float))
    mean_vote = np.atleast_1d(np.asarray(mean_vote, dtype=float))
    k, m = el.n_experts, el.n_nonexperts
    others = m - 1
    experts = _pmf(k, el.expert_precision)
    base = np.zeros(participate.size)
    slope = np.zeros(participate.size)
    eua = np.zeros(participate.size)
    voting_pmf = _pmf(others, participate)
    for v in range(others + 1):
        w = voting_pmf[:, v]
        joint = np.zeros((participate.size, v + k + 1))
        _add_convolved(joint, w, _pmf(v, mean_vote), experts)
        c = np.arange(v + k + 1)
        cast_if_vote = v + k + 1
        win_right = (2 * (c + 1) > cast_if_vote) + 0.5 * (2 * (c + 1) == cast_if_vote)
        win_wrong = (2 * c > cast_if_vote) + 0.5 * (2 * c == cast_if_vote)
        win_abstain = (2 * c > v + k) + 0.5 * (2 * c == v + k)
        base += joint @ win_wrong
        slope += joint @ (win_right - win_wrong)
        eua += joint @ win_abstain
    return base, slope, eua


def _threshold(profile) -> float:
    if isinstance(profile, (StrategyProfileLD, StrategyProfileMVA)):
        return float(profile.threshold)
    return float(profile)


def _require_canonical(profile) -> None:
    if isinstance(profile, StrategyProfileLD) and not profile.is_canonical:
        raise ValueError("exact evaluation covers only profiles where experts vote and "
                         "non-experts delegate to experts; simulate other profiles")


def eu_mv(el: Electorate, dist: PrecisionDistribution) -> float:
    """Probability that sincere universal majority voting is correct."""
    counts = np.convolve(_pmf(el.n_nonexperts, dist.mean()), _pmf(el.n_experts, el.expert_precision))
    return float(counts[el.majority:].sum())


def eu_nd_ld(q_i: float, profile, el: Electorate, dist: PrecisionDistribution) -> float:
    """Interim utility of a non-expert who casts her own vote under LD."""
    _require_canonical(profile)
    base, slope, _ = ld_components(el, *_threshold_state(dist, _threshold(profile)))
    return float(base[0] + q_i * slope[0])


def eu_d_ld(profile, el: Electorate, dist: PrecisionDistribution) -> float:
    """Interim utility of a non-expert who delegates to a random expert."""
    _require_canonical(profile)
    return float(ld_components(el, *_threshold_state(dist, _threshold(profile)))[2][0])


def ex_ante_eu_ld(profile, el: Electorate, dist: PrecisionDistribution) -> float:
    """Ex-ante probability of a correct decision when all non-experts use ``profile``.

    Because the interim utility of voting is affine in the voter's own
    precision, integrating it over ``q >= threshold`` only needs the tail mean.
    """
    _require_canonical(profile)
    participate, mean_vote = _threshold_state(dist, _threshold(profile))
    base, slope, eud = ld_components(el, participate, mean_vote)
    return float(((1 - participate) * eud + participate * (base + slope * mean_vote))[0])


def eu_v_mva(q_i: float, profile, el: Electorate, dist: PrecisionDistribution) -> float:
    base, slope, _ = mva_components(el, *_threshold_state(dist, _threshold(profile)))
    return float(base[0] + q_i * slope[0])


def eu_a_mva(profile, el: Electorate, dist: PrecisionDistribution) -> float:
    return float(mva_components(el, *_threshold_state(dist, _threshold(profile)))[2][0])


def ex_ante_eu_mva(profile, el: Electorate, dist: PrecisionDistribution) -> float:
    participate, mean_vote = _threshold_state(dist, _threshold(profile))
    base, slope, eua = mva_components(el, participate, mean_vote)
    return float(((1 - participate) * eua + participate * (base + slope * mean_vote))[0])


def ex_ante_curve(system: str, el: Electorate, dist: PrecisionDistribution, thresholds) -> np.ndarray:
    """Vectorised ex-ante utility over an array of symmetric thresholds."""
    participate, mean_vote = _threshold_state(dist, thresholds)
    comps = ld_components if system == "LD" else mva_components
    base, slope, stay_out = comps(el, participate, mean_vote)
    return (1 - participate) * stay_out + participate * (base + slope * mean_vote)


def indifference_gap(system: str, el: Electorate, dist: PrecisionDistribution, thresholds) -> np.ndarray:
    """Gain from voting over delegating/abstaining for a voter sitting at the threshold."""
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    comps = ld_components if system == "LD" else mva_components
    base, slope, stay_out = comps(el, *_threshold_state(dist, thresholds))
    return base + slope * thresholds - stay_out
