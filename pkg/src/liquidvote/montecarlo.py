"""Batches of simulated elections and the heterogeneous-accuracy population model.

Counters are kept as integers per block and summed, so a batch result does
not depend on how blocks are scheduled across threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _rng
from .engine import _weighted_decision, simulate_block, write_jsonl
from .model import Action, Electorate, PrecisionDistribution, System


@dataclass
class BatchResult:
    """Aggregate outcome of ``n_elections`` independent elections.

    Disagreement counts compare the system with universal majority voting on
    the same realised signals.
    """

    system: str
    n_elections: int
    n_correct: int
    n_mv_correct: int
    n_disagree: int
    n_disagree_system_correct: int
    n_disagree_mv_correct: int
    n_out: int
    n_nonexpert_slots: int
    n_coin_toss: int = 0
    n_all_cycle: int = 0

    @property
    def freq_correct(self) -> float:
        return self.n_correct / self.n_elections

    @property
    def freq_mv_correct(self) -> float:
        return self.n_mv_correct / self.n_elections

    @property
    def std_error(self) -> float:
        f = self.freq_correct
        return math.sqrt(f * (1 - f) / self.n_elections)

    @property
    def freq_delegate_or_abstain(self) -> float:
        return self.n_out / self.n_nonexpert_slots if self.n_nonexpert_slots else 0.0

    @property
    def freq_disagree_with_mv(self) -> float:
        return self.n_disagree / self.n_elections

    @property
    def conditional_differential(self) -> float | None:
        """``2 gamma - 1`` on the disagreement set, ``None`` if it is empty."""
        if self.n_disagree == 0:
            return None
        return 2 * self.n_disagree_system_correct / self.n_disagree - 1

    def __add__(self, other: "BatchResult") -> "BatchResult":
        if other.system != self.system:
            raise ValueError("cannot merge results of different systems")
        merged = {k: getattr(self, k) + getattr(other, k) for k in _COUNTERS}
        return BatchResult(self.system, **merged)

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(
            freq_correct=self.freq_correct,
            std_error=self.std_error,
            freq_mv_correct=self.freq_mv_correct,
            freq_delegate_or_abstain=self.freq_delegate_or_abstain,
            freq_disagree_with_mv=self.freq_disagree_with_mv,
            conditional_differential=self.conditional_differential,
        )
        return out


_COUNTERS = [f for f in BatchResult.__dataclass_fields__ if f != "system"]


def _count(system: str, state, decision, mv_decision, out_mask, coin, all_cycle) -> BatchResult:
    correct = decision == state
    mv_correct = mv_decision == state
    disagree = decision != mv_decision
    return BatchResult(
        system=system,
        n_elections=int(state.size),
        n_correct=int(correct.sum()),
        n_mv_correct=int(mv_correct.sum()),
        n_disagree=int(disagree.sum()),
        n_disagree_system_correct=int((disagree & correct).sum()),
        n_disagree_mv_correct=int((disagree & mv_correct).sum()),
        n_out=int(out_mask.sum()),
        n_nonexpert_slots=int(out_mask.size),
        n_coin_toss=int(coin.sum()),
        n_all_cycle=int(all_cycle.sum()),
    )


def _run_blocks(fn, n: int, threads: int, block_size: int = _rng.BLOCK):
    spans = list(_rng.blocks(n, block_size))
    if threads <= 1 or len(spans) == 1:
        return [fn(*s) for s in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


def simulate_batch(system: str, el: Electorate, dist, behavior, reps: int, seed: int,
                   threads: int = 1, audit=None) -> BatchResult:
    """Run ``reps`` elections and summarise them.

    ``dist`` is a precision law or an :class:`AccuracyPopulation`; in the
    latter case ``behavior`` is a :class:`PopulationBehavior` and experts are
    selected from trailing performance.  ``audit`` is an optional text stream
    that receives one JSON line per election (precision-law mode only).
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    system = System.parse(system)
    if isinstance(dist, AccuracyPopulation):
        blocks = _run_blocks(lambda b, lo, hi: _population_block(dist, el.n_total, behavior, hi - lo, seed, b),
                             reps, threads)
        results = [blk.result(system) for blk in blocks]
    else:
        K = el.n_experts

        def run(b, lo, hi):
            blk = simulate_block(system, el, dist, behavior, hi - lo, seed, b)
            out = blk.action[:, K:] != Action.VOTE
            return blk, _count(system, blk.state, blk.decision, blk.mv_decision, out,
                               blk.coin_toss, blk.all_cycle)

        pairs = _run_blocks(run, reps, threads)
        if audit is not None:
            for blk, _ in pairs:
                write_jsonl((blk.record(i, K) for i in range(blk.state.size)), audit)
        results = [r for _, r in pairs]
    total = results[0]
    for r in results[1:]:
        total = total + r
    return total


# ---------------------------------------------------------------------------
# heterogeneous-accuracy population


@dataclass(frozen=True)
class AccuracyPopulation:
    """Latent accuracies from a two-component normal mixture, noisy per bloc.

    An agent's latent accuracy is drawn once.  In every bloc of
    ``bloc_size`` tasks the agent's working accuracy is the latent value plus
    normal noise with sd ``bloc_noise`` (clipped to ``[0, 1]``), and the
    agent answers each task correctly with that probability.
    """

    low_weight: float = 0.05
    low_mean: float = 0.42
    low_sd: float = 0.05
    high_mean: float = 0.5989
    high_sd: float = 0.04
    bloc_noise: float = 0.03
    bloc_size: int = 20
    n_blocs: int = 6

    def __post_init__(self):
        if not 0 <= self.low_weight <= 1:
            raise ValueError("low_weight must lie in [0, 1]")
        if min(self.low_sd, self.high_sd, self.bloc_noise) < 0:
            raise ValueError("standard deviations must be nonnegative")
        if self.bloc_size < 1 or self.n_blocs < 1:
            raise ValueError("bloc_size and n_blocs must be positive")

    @classmethod
    def calibrated(cls, coherence: float = 0.05) -> "AccuracyPopulation":
        """Populations matched to the quoted summary facts for each coherence level.

        Targets (mean accuracy, share of agents below 1/2 over 120 tasks,
        share of blocs below 1/2): (0.59, 0.09, 0.18) at coherence 0.05 and
        (0.56, 0.12, 0.23) at 0.03, plus the next-bloc accuracy of experts
        chosen on trailing performance (0.63 and 0.59).  The last target is
        only partly reachable together with the others.  Most of the spread
        across blocs comes from the binomial noise of 20 tasks.
        """
        if math.isclose(coherence, 0.05):
            return cls()
        if math.isclose(coherence, 0.03):
            return cls(low_weight=0.1, low_mean=0.46, high_mean=0.5711, high_sd=0.02, bloc_noise=0.0)
        raise ValueError("calibrations exist for coherence 0.03 and 0.05")

    @classmethod
    def constant(cls, accuracy: float) -> "AccuracyPopulation":
        return cls(low_weight=0.0, high_mean=accuracy, high_sd=0.0, bloc_noise=0.0)

    @property
    def mean(self) -> float:
        return self.low_weight * self.low_mean + (1 - self.low_weight) * self.high_mean

    def latent(self, rng: np.random.Generator, shape) -> np.ndarray:
        low = rng.random(shape) < self.low_weight
        z = rng.standard_normal(shape)
        acc = np.where(low, self.low_mean + self.low_sd * z, self.high_mean + self.high_sd * z)
        return np.clip(acc, 0.0, 1.0)

    def bloc_accuracy(self, rng: np.random.Generator, latent: np.ndarray, n_blocs: int) -> np.ndarray:
        """Working accuracy per bloc, shape ``latent.shape + (n_blocs,)``."""
        noise = self.bloc_noise * rng.standard_normal(latent.shape + (n_blocs,))
        return np.clip(latent[..., None] + noise, 0.0, 1.0)

    def realised(self, rng: np.random.Generator, working: np.ndarray) -> np.ndarray:
        """Fraction of correct answers in each bloc."""
        return rng.binomial(self.bloc_size, working) / self.bloc_size


@dataclass(frozen=True)
class PopulationBehavior:
    """Per-agent delegation and abstention propensities, independent of accuracy.

    Each non-expert gets a propensity from a beta law with the given mean and
    concentration ``a + b``.
    """

    delegate_rate: float = 0.5
    abstain_rate: float = 0.3
    concentration: float = 4.0

    def propensity(self, rng: np.random.Generator, mean: float, shape) -> np.ndarray:
        if mean <= 0 or mean >= 1 or not np.isfinite(self.concentration):
            return np.full(shape, float(mean))
        return rng.beta(mean * self.concentration, (1 - mean) * self.concentration, shape)


def select_experts_trailing(history, window: int = 2, quantile: float = 0.2) -> np.ndarray:
    """Indices of the top ``quantile`` agents by mean accuracy over the last ``window`` blocs.

    ``history`` has shape ``(n_agents, n_blocs)`` or ``(..., n_agents,
    n_blocs)`` for stacked groups.  Ties go to the lower agent index.
    """
    history = np.asarray(history, dtype=float)
    if window < 1 or window > history.shape[-1]:
        raise ValueError(f"window of {window} blocs exceeds history of {history.shape[-1]}")
    n = history.shape[-2]
    count = int(round(n * quantile))
    if count < 1:
        raise ValueError("quantile selects no agents")
    score = history[..., -window:].mean(axis=-1)
    return np.sort(np.argsort(-score, axis=-1, kind="stable")[..., :count], axis=-1)


@dataclass
class _PopulationBlock:
    state: np.ndarray
    decisions: dict
    out: dict
    window_accuracy: np.ndarray
    next_accuracy: np.ndarray

    def result(self, system: str) -> BatchResult:
        zeros = np.zeros(self.state.size, dtype=bool)
        return _count(system, self.state, self.decisions[system], self.decisions[System.MV],
                      self.out[system], zeros, zeros)


def _population_block(pop: AccuracyPopulation, N: int, behavior: PopulationBehavior | None,
                      n: int, seed: int, block: int) -> _PopulationBlock:
    """One fresh group per replication; all systems see the same signals."""
    behavior = behavior or PopulationBehavior()
    rng = _rng.stream(seed, block, "population", N)
    latent = pop.latent(rng, (n, N))
    working = pop.bloc_accuracy(rng, latent, 3)
    history = pop.realised(rng, working[..., :2])
    experts = select_experts_trailing(history, window=2, quantile=0.2)
    K = experts.shape[1]
    is_expert = np.zeros((n, N), dtype=bool)
    np.put_along_axis(is_expert, experts, True, axis=1)

    current = working[..., 2]
    state = (rng.random(n) < 0.5).astype(np.int8)
    right = rng.random((n, N)) < current
    votes = np.where(right, state[:, None], 1 - state[:, None]).astype(np.int8)
    coin = rng.random(n)

    delegate = (rng.random((n, N)) < behavior.propensity(rng, behavior.delegate_rate, (n, N))) & ~is_expert
    abstain = (rng.random((n, N)) < behavior.propensity(rng, behavior.abstain_rate, (n, N))) & ~is_expert

    ones = np.ones((n, N), dtype=np.int64)
    mv, _ = _weighted_decision(ones, votes, coin)

    mva_weights = (~abstain).astype(np.int64)
    mva, _ = _weighted_decision(mva_weights, votes, coin)

    ld_weights = (~delegate).astype(np.int64)
    pick = np.minimum((rng.random((n, N)) * K).astype(np.int64), K - 1)
    target = np.take_along_axis(experts, pick, axis=1)
    rows, cols = np.nonzero(delegate)
    np.add.at(ld_weights, (rows, target[rows, cols]), 1)
    ld, _ = _weighted_decision(ld_weights, votes, coin)

    expert_window = np.take_along_axis(history.mean(axis=-1), experts, axis=1)
    expert_next = pop.realised(rng, np.take_along_axis(current, experts, axis=1))
    nonexpert = ~is_expert
    return _PopulationBlock(
        state=state,
        decisions={System.LD: ld, System.MVA: mva, System.MV: mv},
        out={System.LD: delegate[nonexpert], System.MVA: abstain[nonexpert],
             System.MV: np.zeros(int(nonexpert.sum()), dtype=bool)},
        window_accuracy=expert_window.ravel(),
        next_accuracy=expert_next.ravel(),
    )


@dataclass
class ComparisonRow:
    n_total: int
    system: str
    freq_correct: float
    std_error: float
    freq_disagree_with_mv: float
    conditional_differential: float | None


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    ordering_frequency: dict = field(default_factory=dict)
    """Per size, share of replications where correctness follows MV >= MVA >= LD."""

    def to_csv(self) -> str:
        lines = ["n_total,system,freq_correct,std_error,freq_disagree_with_mv,conditional_differential"]
        for r in self.rows:
            cd = "" if r.conditional_differential is None else f"{r.conditional_differential:.6f}"
            lines.append(f"{r.n_total},{r.system},{r.freq_correct:.6f},{r.std_error:.6f},"
                         f"{r.freq_disagree_with_mv:.6f},{cd}")
        return "\n".join(lines) + "\n"

    def dumps(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows],
                           "ordering_frequency": self.ordering_frequency}, indent=2, sort_keys=True)


def compare_systems(population: AccuracyPopulation, sizes=(5, 15, 125), behavior: PopulationBehavior | None = None,
                    reps: int = 10_000, seed: int = 0, threads: int = 1) -> Comparison:
    """LD, MVA and MV on identical signal draws for each group size."""
    rows, ordering = [], {}
    for N in sizes:
        if N < 5 or N % 2 == 0:
            raise ValueError(f"group size must be odd and at least 5, got {N}")
        blocks = _run_blocks(lambda b, lo, hi: _population_block(population, N, behavior, hi - lo, seed, b),
                             reps, threads)
        for system in (System.LD, System.MVA, System.MV):
            parts = [blk.result(system) for blk in blocks]
            total = parts[0]
            for p in parts[1:]:
                total = total + p
            rows.append(ComparisonRow(N, system, total.freq_correct, total.std_error,
                                      total.freq_disagree_with_mv, total.conditional_differential))
        ordered = 0
        for blk in blocks:
            mv, mva, ld = (blk.decisions[s] == blk.state for s in (System.MV, System.MVA, System.LD))
            ordered += int(np.sum((mv >= mva) & (mva >= ld)))
        ordering[str(N)] = ordered / reps
    return Comparison(rows, ordering)


def reversion_to_mean(population: AccuracyPopulation, n_total: int, reps: int, seed: int) -> tuple[float, float]:
    """Mean expert accuracy in the selection window and in the following bloc."""
    blk = _population_block(population, n_total, None, reps, seed, 0)
    return float(blk.window_accuracy.mean()), float(blk.next_accuracy.mean())


def population_summary(population: AccuracyPopulation, n_agents: int, seed: int) -> dict:
    """Statistics comparable to the quoted calibration targets."""
    rng = _rng.stream(seed, 0, "population")
    latent = population.latent(rng, n_agents)
    working = population.bloc_accuracy(rng, latent, population.n_blocs)
    blocs = population.realised(rng, working)
    overall = blocs.mean(axis=1)
    return {
        "mean_accuracy": float(overall.mean()),
        "share_agents_below_half": float((overall < 0.5).mean()),
        "share_blocs_below_half": float((blocs < 0.5).mean()),
        "bloc_p05": float(np.quantile(blocs, 0.05)),
        "bloc_p95": float(np.quantile(blocs, 0.95)),
    }
