"""Single-election mechanics: signals, threshold behaviour, delegation graphs, tally.

Voters ``0..K-1`` are the experts and ``K..N-1`` the non-experts.  States,
signals, votes and decisions are coded 0/1.

Batches are simulated block by block with numpy.  Delegation graphs without
cycles, chains included, are resolved in vectorised form; elections with a
cycle go through :func:`resolve_delegations` one at a time.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _rng
from .model import (
    Action,
    BehavioralProfile,
    Electorate,
    ElectionRecord,
    PrecisionDistribution,
    StrategyProfileLD,
    StrategyProfileMVA,
    System,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# signals


def draw_election(el: Electorate, dist: PrecisionDistribution, seed: int, n: int = 1, block: int = 0):
    """Draw states, precisions and signals for ``n`` elections.

    Returns ``(state, precision, signal)`` with shapes ``(n,)``, ``(n, N)``,
    ``(n, N)``.  The prior on the state is one half.
    """
    N, K = el.n_total, el.n_experts
    state = (_rng.stream(seed, block, "state").random(n) < 0.5).astype(np.int8)
    precision = np.empty((n, N))
    precision[:, :K] = el.expert_precision
    precision[:, K:] = dist.quantile(_rng.stream(seed, block, "precision").random((n, N - K)))
    right = _rng.stream(seed, block, "signal").random((n, N)) < precision
    signal = np.where(right, state[:, None], 1 - state[:, None]).astype(np.int8)
    return state, precision, signal


# ---------------------------------------------------------------------------
# delegation graphs


class DelegationError(ValueError):
    pass


@dataclass
class Resolution:
    weights: np.ndarray
    all_cycle: bool
    trace: list[tuple[int, int, int]]
    """``(voter, old_target, new_target)`` for every redirected link."""


def _pick_target(i: int, members: np.ndarray, u: float) -> int:
    """Uniform member of ``members`` other than ``i``, driven by ``u`` in [0, 1)."""
    others = members[members != i]
    if others.size == 0:
        raise DelegationError(f"voter {i} has nobody to delegate to in the chosen class")
    return int(others[min(int(u * others.size), others.size - 1)])


def _terminals(target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Follow delegation links.

    Returns ``(terminal, cycle_rep)``: ``terminal[i]`` is the casting voter
    that ends ``i``'s chain or -1 if the chain falls into a cycle, in which
    case ``cycle_rep[i]`` is the smallest voter on that cycle.
    """
    n = target.size
    terminal = np.full(n, -2)
    cycle_rep = np.full(n, -1)
    for start in range(n):
        if terminal[start] != -2:
            continue
        path, pos = [], {}
        v = start
        while terminal[v] == -2 and v not in pos and target[v] >= 0:
            pos[v] = len(path)
            path.append(v)
            v = int(target[v])
        if terminal[v] != -2:
            end, rep = terminal[v], cycle_rep[v]
        elif target[v] < 0:
            end, rep = v, -1
            terminal[v] = v
        else:
            end, rep = -1, min(path[pos[v]:])
        for u in path:
            terminal[u] = end
            cycle_rep[u] = rep
    return terminal, cycle_rep


def resolve_delegations(is_expert: Sequence[bool], actions: Sequence[int], seed=None,
                        targets: Sequence[int] | None = None,
                        rng: np.random.Generator | None = None) -> Resolution:
    """Turn LD actions into final voting weights.

    A delegated vote goes to a uniformly drawn member of the chosen class
    other than the delegator (unless ``targets`` fixes the links).  Packets
    follow chains of delegation.  A packet trapped in a cycle is released by
    choosing one of the trapped voters uniformly and redirecting that voter's
    link to another member of the same class who is not trapped; when that
    class offers nobody, another trapped voter is tried.  If every voter is
    trapped the election has no votes and ``all_cycle`` is set.
    """
    is_expert = np.asarray(is_expert, dtype=bool)
    actions = np.asarray(actions, dtype=int)
    n = actions.size
    if np.any(actions == Action.ABSTAIN):
        raise DelegationError("abstention is not available under liquid democracy")
    if rng is None:
        rng = np.random.default_rng(seed)
    experts, nonexperts = np.flatnonzero(is_expert), np.flatnonzero(~is_expert)

    def members(action):
        return experts if action == Action.DELEGATE_EXPERT else nonexperts

    target = np.full(n, -1)
    for i in np.flatnonzero(actions != Action.VOTE):
        if targets is not None and targets[i] >= 0:
            t = int(targets[i])
            if t == i or t not in members(actions[i]):
                raise DelegationError(f"voter {i} cannot delegate to {t}")
            target[i] = t
        else:
            target[i] = _pick_target(i, members(actions[i]), rng.random())

    trace: list[tuple[int, int, int]] = []
    for _ in range(n * n + 1):
        terminal, rep = _terminals(target)
        trapped_all = terminal < 0
        if not trapped_all.any():
            return Resolution(np.bincount(terminal, minlength=n), False, trace)
        if trapped_all.all() and np.unique(rep[trapped_all]).size == 1:
            return Resolution(np.zeros(n, dtype=int), True, trace)
        cycle = int(rep[trapped_all].min())
        trapped = np.flatnonzero(rep == cycle)
        trapped_set = set(trapped.tolist())
        on_cycle = {cycle}
        v = int(target[cycle])
        while v != cycle:
            on_cycle.add(v)
            v = int(target[v])
        untried = list(trapped)
        chosen = new = None
        while untried:
            v = int(untried.pop(int(rng.integers(len(untried)))))
            pool = [u for u in members(actions[v]) if u != v and u != target[v] and u not in trapped_set]
            if pool:
                chosen, new = v, int(pool[int(rng.integers(len(pool)))])
                break
        if chosen is None:
            # no trapped link can reach its own class outside the trapped set
            chosen = int(trapped[int(rng.integers(trapped.size))])
            pool = np.setdiff1d(np.arange(n), trapped)
            new = int(pool[int(rng.integers(pool.size))])
        # the whole trapped packet follows the redirected link: a link that
        # only feeds the cycle also moves the cycle node it enters
        moved = [chosen]
        if chosen not in on_cycle:
            entry = chosen
            while entry not in on_cycle:
                entry = int(target[entry])
            moved.append(entry)
        for v in moved:
            trace.append((v, int(target[v]), new))
            target[v] = new
    raise DelegationError("delegation resolution did not terminate")  # pragma: no cover


# ---------------------------------------------------------------------------
# tally


def tally(weights, votes, seed=None, rng: np.random.Generator | None = None) -> tuple[int, bool]:
    """Weighted majority between alternatives 0 and 1.

    ``votes`` is -1 for voters who did not cast.  Returns ``(decision,
    coin_toss)``; an exact tie, including no votes at all, is settled by a
    fair coin.
    """
    weights = np.asarray(weights)
    votes = np.asarray(votes)
    for_one = int(weights[votes == 1].sum())
    for_zero = int(weights[votes == 0].sum())
    if for_one != for_zero:
        return int(for_one > for_zero), False
    if for_one == 0:
        log.info("no votes cast; decision by coin toss")
    if rng is None:
        rng = np.random.default_rng(seed)
    return int(rng.random() < 0.5), True


def _weighted_decision(weights: np.ndarray, votes: np.ndarray, coin: np.ndarray):
    """Vectorised :func:`tally` over rows; ``coin`` holds one uniform per row."""
    margin = (weights * ((votes == 1).astype(np.int64) - (votes == 0))).sum(axis=1)
    tie = margin == 0
    decision = np.where(tie, coin < 0.5, margin > 0).astype(np.int8)
    return decision, tie


# ---------------------------------------------------------------------------
# behaviour


@dataclass(frozen=True)
class _Rules:
    system: str
    threshold_law: PrecisionDistribution | None
    threshold: float | None
    against: object
    nonexpert_share: float = 0.0
    expert_to_expert: float = 0.0
    expert_to_nonexpert: float = 0.0

    def thresholds(self, u: np.ndarray) -> np.ndarray:
        if self.threshold is not None:
            return np.full(u.shape, self.threshold)
        return self.threshold_law.quantile(u)

    def against_rate(self, precision: np.ndarray) -> np.ndarray:
        if isinstance(self.against, BehavioralProfile):
            return self.against.against_rate(precision)
        return np.broadcast_to(np.asarray(self.against, dtype=float), precision.shape)

    @property
    def canonical(self) -> bool:
        return self.nonexpert_share == 0 and self.expert_to_expert == 0 and self.expert_to_nonexpert == 0


def rules_for(system: str, behavior, dist: PrecisionDistribution | None = None) -> _Rules:
    """Normalise a strategy or behavioural profile for the simulator."""
    system = System.parse(system)
    if system == System.MV or behavior is None:
        if system != System.MV and behavior is None:
            raise ValueError(f"{system} needs a strategy or behavioural profile")
        against = behavior if isinstance(behavior, BehavioralProfile) else 0.0
        return _Rules(System.MV, None, 0.0, against)
    if isinstance(behavior, BehavioralProfile):
        return _Rules(system, behavior.threshold_law, None, behavior)
    if isinstance(behavior, StrategyProfileMVA):
        if system != System.MVA:
            raise ValueError("an abstention profile needs the MVA system")
        return _Rules(system, None, behavior.threshold, 0.0)
    if isinstance(behavior, StrategyProfileLD):
        if system != System.LD:
            raise ValueError("a delegation profile needs the LD system")
        if dist is not None:
            behavior.validate(dist)
        return _Rules(system, None, behavior.threshold, 0.0, behavior.nonexpert_share(),
                      behavior.expert_prob_delegate_expert, behavior.expert_prob_delegate_nonexpert)
    if isinstance(behavior, (int, float)):
        return _Rules(system, None, float(behavior), 0.0)
    raise TypeError(f"unsupported behaviour {behavior!r}")


# ---------------------------------------------------------------------------
# batch simulation


@dataclass
class Block:
    """Arrays for a block of elections (rows are elections)."""

    state: np.ndarray
    precision: np.ndarray
    signal: np.ndarray
    action: np.ndarray
    votes: np.ndarray
    weights: np.ndarray
    decision: np.ndarray
    coin_toss: np.ndarray
    all_cycle: np.ndarray
    mv_decision: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return self.decision == self.state

    @property
    def mv_correct(self) -> np.ndarray:
        return self.mv_decision == self.state

    def record(self, i: int, n_experts: int) -> ElectionRecord:
        is_expert = np.zeros(self.precision.shape[1], dtype=bool)
        is_expert[:n_experts] = True
        return ElectionRecord(
            true_state=int(self.state[i]),
            is_expert=is_expert,
            precision=self.precision[i].copy(),
            signal=self.signal[i].copy(),
            action=self.action[i].copy(),
            votes=self.votes[i].copy(),
            final_weight=self.weights[i].copy(),
            decision=int(self.decision[i]),
            coin_toss=bool(self.coin_toss[i]),
            all_cycle=bool(self.all_cycle[i]),
        )


def simulate_block(system: str, el: Electorate, dist: PrecisionDistribution, behavior,
                   n: int, seed: int, block: int = 0) -> Block:
    """Simulate ``n`` independent elections keyed by ``(seed, block)``."""
    rules = rules_for(system, behavior, dist)
    N, K = el.n_total, el.n_experts
    state, precision, signal = draw_election(el, dist, seed, n, block)

    action = np.full((n, N), int(Action.VOTE), dtype=np.int8)
    if rules.system != System.MV:
        thr = rules.thresholds(_rng.stream(seed, block, "threshold").random((n, N - K)))
        out = precision[:, K:] < thr
        if rules.system == System.MVA:
            action[:, K:][out] = Action.ABSTAIN
        else:
            u_dir = _rng.stream(seed, block, "direction").random((n, N))
            to_ne = u_dir[:, K:] < rules.nonexpert_share
            action[:, K:][out & ~to_ne] = Action.DELEGATE_EXPERT
            action[:, K:][out & to_ne] = Action.DELEGATE_NONEXPERT
            ue = u_dir[:, :K]
            action[:, :K][ue < rules.expert_to_expert] = Action.DELEGATE_EXPERT
            action[:, :K][(ue >= rules.expert_to_expert)
                          & (ue < rules.expert_to_expert + rules.expert_to_nonexpert)] = Action.DELEGATE_NONEXPERT

    flip = _rng.stream(seed, block, "noise").random((n, N)) < rules.against_rate(precision)
    intended = np.where(flip, 1 - signal, signal).astype(np.int8)
    casting = action == Action.VOTE
    votes = np.where(casting, intended, -1).astype(np.int8)

    u_target = _rng.stream(seed, block, "target").random((n, N))
    weights = casting.astype(np.int64)
    all_cycle = np.zeros(n, dtype=bool)
    if rules.system == System.LD:
        target = vector_targets(action, u_target, K)
        weights, cyclic = resolve_acyclic(target)
        is_expert = np.arange(N) < K
        for i in cyclic:
            res = resolve_delegations(is_expert, action[i], targets=target[i],
                                      rng=_rng.stream(seed, block, "cycle", i))
            weights[i] = res.weights
            all_cycle[i] = res.all_cycle

    coin = _rng.stream(seed, block, "tie").random(n)
    decision, tie = _weighted_decision(weights, votes, coin)
    decision = np.where(all_cycle, coin < 0.5, decision).astype(np.int8)
    tie |= all_cycle

    mv_decision, _ = _weighted_decision(np.ones((n, N), dtype=np.int64), intended, coin)
    return Block(state, precision, signal, action, votes, weights, decision, tie, all_cycle, mv_decision)


def _targets_from_uniforms(is_expert, action, u) -> np.ndarray:
    experts, nonexperts = np.flatnonzero(is_expert), np.flatnonzero(~is_expert)
    targets = np.full(action.size, -1)
    for i in np.flatnonzero(action != Action.VOTE):
        pool = experts if action[i] == Action.DELEGATE_EXPERT else nonexperts
        targets[i] = _pick_target(i, pool, u[i])
    return targets


def vector_targets(action: np.ndarray, u: np.ndarray, n_experts: int) -> np.ndarray:
    """Row-wise delegation targets, -1 for voters who cast.

    Same rule as :func:`_pick_target`: the uniform ``u`` indexes the chosen
    class with the delegator removed.
    """
    n, N = action.shape
    K, M = n_experts, N - n_experts
    idx = np.broadcast_to(np.arange(N), (n, N))
    own_is_expert = idx < K
    target = np.full((n, N), -1, dtype=np.int64)
    for act, start, size in ((Action.DELEGATE_EXPERT, 0, K), (Action.DELEGATE_NONEXPERT, K, M)):
        mask = action == act
        if not mask.any():
            continue
        inside = own_is_expert if start == 0 else ~own_is_expert
        pool = np.where(inside, size - 1, size)
        if np.any(mask & (pool == 0)):
            raise DelegationError("a voter has nobody to delegate to in the chosen class")
        k = np.minimum((u * pool).astype(np.int64), np.maximum(pool - 1, 0))
        k = np.where(inside & (k >= idx - start), k + 1, k)
        target[mask] = (start + k)[mask]
    return target


def resolve_acyclic(target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights for every row whose delegation graph has no cycle.

    Chains are collapsed by pointer jumping.  Returns ``(weights, rows)``
    where ``rows`` lists the elections that contain a cycle; their weights
    are left at zero for the caller to fill in.
    """
    n, N = target.shape
    casting = target < 0
    hop = np.where(casting, np.arange(N), target)
    for _ in range(max(1, int(np.ceil(np.log2(N)))) + 1):
        hop = np.take_along_axis(hop, hop, axis=1)
    ends_cast = np.take_along_axis(casting, hop, axis=1)
    cyclic = np.flatnonzero(~ends_cast.all(axis=1))
    flat = (np.arange(n)[:, None] * N + hop).ravel()
    weights = np.bincount(flat, minlength=n * N).reshape(n, N)
    weights[cyclic] = 0
    return weights, cyclic


def run_election(system: str, el: Electorate, dist: PrecisionDistribution, behavior, seed: int) -> ElectionRecord:
    """Simulate one election; a pure function of its arguments."""
    return simulate_block(system, el, dist, behavior, 1, seed).record(0, el.n_experts)


def write_jsonl(records: Iterable[ElectionRecord], fh) -> None:
    for rec in records:
        fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
