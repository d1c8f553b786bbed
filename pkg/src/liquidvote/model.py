"""Domain types for common-interest voting games with delegation or abstention.

The electorate has ``n_experts`` voters of known precision ``p`` and
``n_nonexperts`` voters whose precision is drawn from a known law.  Strategy
profiles are threshold rules on that private precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Sequence, Union

import numpy as np


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class Electorate:
    """Sizes and expert precision of one voting game."""

    n_total: int
    n_experts: int
    expert_precision: float

    def __post_init__(self):
        n, k = int(self.n_total), int(self.n_experts)
        if n < 1 or n % 2 == 0:
            raise ValueError(f"n_total must be a positive odd integer, got {self.n_total}")
        if k < 1 or k % 2 == 0 or k > n:
            raise ValueError(f"n_experts must be odd and in [1, n_total], got {self.n_experts}")
        p = float(self.expert_precision)
        if not (0.5 < p <= 1.0):
            raise ValueError(f"expert_precision must lie in (1/2, 1], got {p}")
        object.__setattr__(self, "n_total", n)
        object.__setattr__(self, "n_experts", k)
        object.__setattr__(self, "expert_precision", p)

    @property
    def n_nonexperts(self) -> int:
        return self.n_total - self.n_experts

    @property
    def majority(self) -> int:
        """Smallest vote count that beats half of ``n_total``."""
        return (self.n_total + 1) // 2


# ---------------------------------------------------------------------------
# precision distributions


class PrecisionDistribution:
    """Law of non-expert precision on ``[lo, hi]``.

    Subclasses implement :meth:`cdf`, :meth:`prob_below`, :meth:`upper_tail`
    and :meth:`sample`.  The threshold convention used throughout the package
    is *delegate (abstain) iff q < threshold*, so the mass that participates
    at threshold ``t`` is ``P(q >= t)``.
    """

    lo: float
    hi: float

    def cdf(self, t):
        raise NotImplementedError

    def prob_below(self, t):
        """``P(q < t)``; equals :meth:`cdf` for atomless laws."""
        raise NotImplementedError

    def upper_tail(self, t):
        """Return ``(P(q >= t), E[q | q >= t])``, vectorised over ``t``.

        Where the tail is empty the conditional mean is reported as its
        limit ``hi``.
        """
        raise NotImplementedError

    def conditional_mean_above(self, t):
        """``E[q | q > t]``; returns ``hi`` at ``t = hi``."""
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        return float(self.upper_tail(self.lo)[1])

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.quantile(rng.random(size))

    def _check_support(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"support must satisfy 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ContinuousUniform(PrecisionDistribution):
    lo: float = 0.5
    hi: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        self._check_support()
        if self.lo == self.hi:
            raise ValueError("degenerate uniform; use Empirical for a point mass")

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    prob_below = cdf

    def upper_tail(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.lo, self.hi)
        return 1.0 - self.cdf(t), 0.5 * (t + self.hi)

    def conditional_mean_above(self, t):
        return self.upper_tail(t)[1]

    def quantile(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


class _Atomic(PrecisionDistribution):
    """Shared machinery for finitely supported laws."""

    points: np.ndarray
    weights: np.ndarray

    def _init_atoms(self, points, weights):
        points = np.asarray(points, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if points.ndim != 1 or points.shape != weights.shape or points.size == 0:
            raise ValueError("points and weights must be matching non-empty 1-d arrays")
        if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("weights must be nonnegative and sum to 1")
        order = np.argsort(points, kind="stable")
        points, weights = points[order], weights[order] / weights.sum()
        self.__dict__["points"] = points
        self.__dict__["weights"] = weights
        self.__dict__["_cum"] = np.cumsum(weights)
        # suffix sums of mass and first moment, index i covers points[i:]
        self.__dict__["_tail_mass"] = np.append(np.cumsum(weights[::-1])[::-1], 0.0)
        self.__dict__["_tail_moment"] = np.append(np.cumsum((points * weights)[::-1])[::-1], 0.0)

    def cdf(self, t):
        idx = np.searchsorted(self.points, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)

    def prob_below(self, t):
        idx = np.searchsorted(self.points, np.asarray(t, dtype=float), side="left")
        return np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)

    def _tail(self, idx):
        mass = self._tail_mass[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(mass > 0, self._tail_moment[idx] / np.where(mass > 0, mass, 1.0), self.hi)
        return np.clip(np.where(mass < 1e-15, 0.0, mass), 0.0, 1.0), mean

    def upper_tail(self, t):
        return self._tail(np.searchsorted(self.points, np.asarray(t, dtype=float), side="left"))

    def conditional_mean_above(self, t):
        return self._tail(np.searchsorted(self.points, np.asarray(t, dtype=float), side="right"))[1]

    def mixed_tail(self, index: int, stay_out: float) -> tuple[float, float]:
        """Participation and tail mean when a fraction ``stay_out`` of atom ``index`` stays out."""
        a, w = self.points[index], self.weights[index]
        mass = self._tail_mass[index + 1] + (1.0 - stay_out) * w
        if mass <= 0:
            return 0.0, float(self.hi)
        return float(min(mass, 1.0)), float((self._tail_moment[index + 1] + (1.0 - stay_out) * w * a) / mass)

    def quantile(self, u):
        idx = np.searchsorted(self._cum, np.asarray(u, dtype=float), side="right")
        return self.points[np.minimum(idx, self.points.size - 1)]

    def mean(self) -> float:
        return float(self.points @ self.weights)


@dataclass(frozen=True, eq=False)
class DiscreteBinned(_Atomic):
    """Equal-mass atoms at the midpoints of bins of width ``bin_width``."""

    lo: float = 0.5
    hi: float = 0.7
    bin_width: float = 0.01
    points: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._check_support()
        nbins = (self.hi - self.lo) / self.bin_width
        if self.bin_width <= 0 or abs(nbins - round(nbins)) > 1e-9 or round(nbins) < 1:
            raise ValueError("bin_width must divide hi - lo evenly")
        nbins = int(round(nbins))
        mids = self.lo + self.bin_width * (np.arange(nbins) + 0.5)
        self._init_atoms(mids, np.full(nbins, 1.0 / nbins))


@dataclass(frozen=True, eq=False)
class Empirical(_Atomic):
    """Finite law given as ``(q, weight)`` pairs; a single pair is a point mass."""

    pairs: tuple = ()
    lo: float = field(init=False)
    hi: float = field(init=False)
    points: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pairs = tuple((float(q), float(w)) for q, w in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        q = [a for a, _ in pairs]
        self._init_atoms(q, [b for _, b in pairs])
        object.__setattr__(self, "lo", float(self.points[0]))
        object.__setattr__(self, "hi", float(self.points[-1]))
        self._check_support()

    @classmethod
    def point_mass(cls, q: float) -> "Empirical":
        return cls(((q, 1.0),))

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "Empirical":
        values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
        return cls(tuple(zip(values, counts / counts.sum())))


def conditional_mean_above(dist: PrecisionDistribution, t: float) -> float:
    """Expected precision of a voter known to have precision above ``t``."""
    if not (dist.lo - 1e-12 <= t <= dist.hi + 1e-12):
        raise ValueError(f"t={t} outside support [{dist.lo}, {dist.hi}]")
    value = float(dist.conditional_mean_above(t))
    if not (dist.lo - 1e-12 <= value <= dist.hi + 1e-12):
        raise ValueError("malformed distribution: tail mean outside support")
    return value


def parse_distribution(spec: str) -> PrecisionDistribution:
    """Build a distribution from ``uniform:lo:hi``, ``binned:lo:hi:w`` or ``point:q``."""
    kind, *args = spec.split(":")
    vals = [float(a) for a in args]
    if kind == "uniform" and len(vals) == 2:
        return ContinuousUniform(*vals)
    if kind == "binned" and len(vals) == 3:
        return DiscreteBinned(*vals)
    if kind == "point" and len(vals) == 1:
        return Empirical.point_mass(vals[0])
    raise ValueError(f"unrecognised distribution spec {spec!r}")


def describe_distribution(dist: PrecisionDistribution) -> str:
    if isinstance(dist, ContinuousUniform):
        return f"uniform:{dist.lo}:{dist.hi}"
    if isinstance(dist, DiscreteBinned):
        return f"binned:{dist.lo}:{dist.hi}:{dist.bin_width}"
    if isinstance(dist, Empirical) and len(dist.pairs) == 1:
        return f"point:{dist.lo}"
    return f"empirical:{len(dist.points)}"


# ---------------------------------------------------------------------------
# strategies and behaviour


@dataclass(frozen=True)
class StrategyProfileLD:
    """Semi-symmetric delegation profile.

    Non-experts with ``q < threshold`` delegate; a delegator targets an expert
    with probability ``prob_delegate_to_expert / F(threshold)``.  Leaving
    ``prob_delegate_to_expert`` as ``None`` means every delegator targets an
    expert.
    """

    threshold: float
    prob_delegate_to_expert: float | None = None
    prob_delegate_to_nonexpert: float = 0.0
    expert_prob_delegate_expert: float = 0.0
    expert_prob_delegate_nonexpert: float = 0.0

    def __post_init__(self):
        _check_prob("threshold", self.threshold)
        if self.prob_delegate_to_expert is not None:
            _check_prob("prob_delegate_to_expert", self.prob_delegate_to_expert)
        _check_prob("prob_delegate_to_nonexpert", self.prob_delegate_to_nonexpert)
        _check_prob("expert_prob_delegate_expert", self.expert_prob_delegate_expert)
        _check_prob("expert_prob_delegate_nonexpert", self.expert_prob_delegate_nonexpert)
        _check_prob("expert delegation total",
                    self.expert_prob_delegate_expert + self.expert_prob_delegate_nonexpert)

    @property
    def is_canonical(self) -> bool:
        return (self.prob_delegate_to_nonexpert == 0.0
                and self.expert_prob_delegate_expert == 0.0
                and self.expert_prob_delegate_nonexpert == 0.0)

    def nonexpert_share(self) -> float:
        """Probability that a delegating non-expert targets another non-expert."""
        if self.prob_delegate_to_expert is None:
            return 0.0 if self.prob_delegate_to_nonexpert == 0.0 else 1.0
        total = self.prob_delegate_to_expert + self.prob_delegate_to_nonexpert
        return 0.0 if total == 0 else self.prob_delegate_to_nonexpert / total

    def validate(self, dist: PrecisionDistribution) -> None:
        if self.prob_delegate_to_expert is None:
            return
        mass = float(dist.prob_below(self.threshold))
        total = self.prob_delegate_to_expert + self.prob_delegate_to_nonexpert
        if not math.isclose(total, mass, abs_tol=1e-9):
            raise ValueError(f"delegation probabilities sum to {total}, expected F(threshold)={mass}")


@dataclass(frozen=True)
class StrategyProfileMVA:
    """Non-experts abstain iff ``q < threshold``; experts always vote."""

    threshold: float

    def __post_init__(self):
        _check_prob("threshold", self.threshold)


AgainstSignal = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class BehavioralProfile:
    """Heterogeneous threshold behaviour with noisy voting.

    ``threshold_law`` gives each non-expert its own threshold; a point mass
    reproduces the symmetric profile.  ``vote_against_signal_rate`` maps a
    voter's precision to the probability that a cast vote contradicts the
    signal.
    """

    threshold_law: PrecisionDistribution
    vote_against_signal_rate: AgainstSignal = 0.0

    @classmethod
    def symmetric(cls, threshold: float, against_signal: AgainstSignal = 0.0) -> "BehavioralProfile":
        return cls(Empirical.point_mass(threshold), against_signal)

    def against_rate(self, precision) -> np.ndarray:
        precision = np.asarray(precision, dtype=float)
        rate = self.vote_against_signal_rate
        out = np.broadcast_to(np.asarray(rate(precision) if callable(rate) else rate, dtype=float),
                              precision.shape)
        if np.any((out < 0) | (out > 1)):
            raise ValueError("vote_against_signal_rate must map into [0, 1]")
        return out


class System:
    LD = "LD"
    MVA = "MVA"
    MV = "MV"

    @staticmethod
    def parse(name: str) -> str:
        key = name.upper()
        if key not in ("LD", "MVA", "MV"):
            raise ValueError(f"unknown voting system {name!r}")
        return key


class Action(IntEnum):
    """Per-voter choice.  The direction of a cast vote is stored separately."""

    VOTE = 0
    DELEGATE_EXPERT = 1
    DELEGATE_NONEXPERT = 2
    ABSTAIN = 3

    @property
    def label(self) -> str:
        return {0: "vote", 1: "delegate", 2: "delegate_nonexpert", 3: "abstain"}[int(self)]


@dataclass
class ElectionRecord:
    """One realised election.

    ``votes`` holds the cast direction (0/1) or -1 for voters who did not
    cast.  ``decision`` is the chosen alternative and ``coin_toss`` records
    whether it came from a fair coin.
    """

    true_state: int
    is_expert: np.ndarray
    precision: np.ndarray
    signal: np.ndarray
    action: np.ndarray
    votes: np.ndarray
    final_weight: np.ndarray
    decision: int
    coin_toss: bool
    all_cycle: bool = False

    @property
    def correct(self) -> bool:
        return self.decision == self.true_state

    def check_invariants(self, system: str) -> None:
        casting = self.votes >= 0
        if system == System.LD and not self.all_cycle:
            if self.final_weight.sum() != self.final_weight.size:
                raise ValueError("vote conservation violated")
            if np.any(self.final_weight[~casting] != 0):
                raise ValueError("a voter who did not cast holds weight")
        if system == System.MVA:
            if np.any(self.final_weight[casting] != 1) or self.final_weight.sum() != casting.sum():
                raise ValueError("MVA weights must be one per cast vote")

    def to_json(self) -> dict:
        return {
            "true_state": int(self.true_state),
            "is_expert": self.is_expert.astype(int).tolist(),
            "precision": [round(float(q), 12) for q in self.precision],
            "signal": self.signal.astype(int).tolist(),
            "action": [Action(int(a)).label for a in self.action],
            "votes": self.votes.astype(int).tolist(),
            "final_weight": self.final_weight.astype(int).tolist(),
            "decision": int(self.decision),
            "coin_toss": bool(self.coin_toss),
            "all_cycle": bool(self.all_cycle),
            "correct": bool(self.correct),
        }
