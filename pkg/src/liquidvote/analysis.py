"""Empirical pipeline for per-subject, per-round decision data.

Covers CSV ingestion, monotonicity-violation threshold estimates, clustered
frequency summaries, the subject-level bootstrap of group decisions and a
permutation two-sample KS test.  :func:`generate_synthetic` produces datasets
with known ground truth from the election engine.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields

import numpy as np
from scipy import stats

from . import _rng
from .engine import simulate_block
from .model import Action, Electorate, PrecisionDistribution, System

log = logging.getLogger(__name__)

ACTIONS = ("vote", "delegate", "abstain")


@dataclass(frozen=True)
class DecisionRow:
    session_id: str
    treatment: str
    group_size: int
    round: int
    subject_id: str
    role: str
    precision: float
    signal_correct: bool
    action: str
    vote_matches_signal: bool | None
    state: int
    group_decision_correct: bool
    group_id: str = ""

    @property
    def cast(self) -> bool:
        return self.action == "vote"

    @property
    def vote_correct(self) -> bool | None:
        if not self.cast:
            return None
        return self.signal_correct == self.vote_matches_signal


COLUMNS = [f.name for f in fields(DecisionRow)]
REQUIRED = COLUMNS[:-1]


class DuplicateRowError(ValueError):
    pass


@dataclass(frozen=True)
class RowError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass
class SubjectDataset:
    rows: list[DecisionRow] = field(default_factory=list)
    support: tuple[float, float] = (0.5, 0.7)

    def __len__(self):
        return len(self.rows)

    def select(self, treatment: str | None = None, group_size: int | None = None) -> "SubjectDataset":
        rows = [r for r in self.rows
                if (treatment is None or r.treatment == treatment)
                and (group_size is None or r.group_size == group_size)]
        return SubjectDataset(rows, self.support)

    def by_subject(self) -> dict[str, list[DecisionRow]]:
        out: dict[str, list[DecisionRow]] = defaultdict(list)
        for r in self.rows:
            out[r.subject_id].append(r)
        return dict(out)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(_format_row(r))

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _format_row(r: DecisionRow) -> list[str]:
    out = []
    for name, value in zip(COLUMNS, astuple(r)):
        if value is None:
            out.append("")
        elif isinstance(value, bool):
            out.append(str(int(value)))
        elif name == "precision":
            out.append(repr(float(value)))
        else:
            out.append(str(value))
    return out


def _parse_bool(text: str, name: str) -> bool:
    if text not in ("0", "1"):
        raise ValueError(f"{name} must be 0 or 1, got {text!r}")
    return text == "1"


def _parse_row(rec: dict, support: tuple[float, float]) -> DecisionRow:
    treatment = rec["treatment"].strip().upper()
    if treatment not in (System.LD, System.MVA):
        raise ValueError(f"treatment must be LD or MVA, got {rec['treatment']!r}")
    role = rec["role"].strip().lower()
    if role not in ("expert", "nonexpert"):
        raise ValueError(f"role must be expert or nonexpert, got {rec['role']!r}")
    action = rec["action"].strip().lower()
    if action not in ACTIONS:
        raise ValueError(f"action must be one of {ACTIONS}, got {rec['action']!r}")
    if action == "delegate" and treatment != System.LD:
        raise ValueError("delegation recorded outside an LD treatment")
    if action == "abstain" and treatment != System.MVA:
        raise ValueError("abstention recorded outside an MVA treatment")
    if role == "expert" and action != "vote":
        raise ValueError("experts must cast their vote")
    precision = float(rec["precision"])
    lo, hi = support
    if not (lo - 1e-12 <= precision <= hi + 1e-12):
        raise ValueError(f"precision {precision} outside declared support [{lo}, {hi}]")
    matches = rec["vote_matches_signal"].strip()
    if action == "vote":
        vote_matches = _parse_bool(matches, "vote_matches_signal")
    elif matches:
        raise ValueError("vote_matches_signal given for a voter who did not cast")
    else:
        vote_matches = None
    state = int(rec["state"])
    if state not in (0, 1):
        raise ValueError(f"state must be 0 or 1, got {state}")
    group_size = int(rec["group_size"])
    if group_size < 1 or group_size % 2 == 0:
        raise ValueError(f"group_size must be a positive odd integer, got {group_size}")
    rnd = int(rec["round"])
    if rnd < 1:
        raise ValueError(f"round must be positive, got {rnd}")
    return DecisionRow(
        session_id=rec["session_id"].strip(),
        treatment=treatment,
        group_size=group_size,
        round=rnd,
        subject_id=rec["subject_id"].strip(),
        role=role,
        precision=precision,
        signal_correct=_parse_bool(rec["signal_correct"].strip(), "signal_correct"),
        action=action,
        vote_matches_signal=vote_matches,
        state=state,
        group_decision_correct=_parse_bool(rec["group_decision_correct"].strip(), "group_decision_correct"),
        group_id=(rec.get("group_id") or "").strip(),
    )


@dataclass
class IngestResult:
    dataset: SubjectDataset
    errors: list[RowError]

    @property
    def ok(self) -> bool:
        return not self.errors


def ingest(stream, support: tuple[float, float] = (0.5, 0.7)) -> IngestResult:
    """Read a decision CSV; bad rows are skipped and reported with line numbers.

    A repeated (subject, treatment, round) is a hard error.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return IngestResult(SubjectDataset([], support), [])
    missing = [c for c in REQUIRED if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"header is missing columns: {', '.join(missing)}")
    rows, errors, seen = [], [], {}
    for rec in reader:
        line = reader.line_num
        try:
            row = _parse_row(rec, support)
        except (ValueError, TypeError, AttributeError) as exc:
            errors.append(RowError(line, str(exc)))
            continue
        key = (row.subject_id, row.treatment, row.round)
        if key in seen:
            raise DuplicateRowError(f"line {line}: subject {row.subject_id} has two rows for "
                                    f"{row.treatment} round {row.round} (first at line {seen[key]})")
        seen[key] = line
        rows.append(row)
    return IngestResult(SubjectDataset(rows, support), errors)


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class ThresholdEstimate:
    """Cut points on precision consistent with the fewest monotonicity violations.

    ``threshold_range`` spans all minimising cuts and ``threshold_mean``
    averages their midpoints.  ``threshold`` is the midpoint of the middle
    minimising cut, so it always reproduces ``min_violation_count``.
    """

    subject_id: str
    min_violation_count: int
    threshold_range: tuple[float, float]
    threshold_mean: float
    threshold: float
    n_rows: int


def count_monotonicity_violations(rows, support: tuple[float, float] = (0.5, 0.7),
                                  subject_id: str | None = None) -> ThresholdEstimate | None:
    """Fewest decisions to flip so that the subject stays out exactly below a cut.

    ``rows`` are :class:`DecisionRow` objects or ``(precision, voted)`` pairs.
    Expert rows are ignored.  Returns ``None`` if no non-expert rows remain.
    """
    pairs = []
    for r in rows:
        if isinstance(r, DecisionRow):
            if r.role != "nonexpert":
                continue
            subject_id = subject_id or r.subject_id
            pairs.append((r.precision, r.cast))
        else:
            pairs.append((float(r[0]), bool(r[1])))
    if not pairs:
        log.info("subject %s never observed as a non-expert", subject_id)
        return None
    q = np.array([p for p, _ in pairs])
    voted = np.array([v for _, v in pairs])
    levels = np.unique(q)
    # cut j: stay out on levels[:j], vote on levels[j:]
    votes_at = np.array([np.sum(voted[q == x]) for x in levels])
    outs_at = np.array([np.sum(~voted[q == x]) for x in levels])
    votes_below = np.concatenate([[0], np.cumsum(votes_at)])
    outs_above = np.concatenate([np.cumsum(outs_at[::-1])[::-1], [0]])
    cost = votes_below + outs_above
    best = int(cost.min())
    cuts = np.flatnonzero(cost == best)
    edges = np.concatenate([[min(support[0], levels[0])], levels, [max(support[1], levels[-1])]])
    lows, highs = edges[cuts], edges[cuts + 1]
    mids = 0.5 * (lows + highs)
    middle = (mids.size - 1) // 2
    threshold = float(mids[middle])
    if cuts[middle] == levels.size and threshold <= levels[-1]:
        # everyone out, highest observation at the top of the support
        threshold = float(np.nextafter(levels[-1], np.inf))
    return ThresholdEstimate(
        subject_id=subject_id or "",
        min_violation_count=best,
        threshold_range=(float(lows.min()), float(highs.max())),
        threshold_mean=float(mids.mean()),
        threshold=threshold,
        n_rows=len(pairs),
    )


def threshold_estimates(dataset: SubjectDataset, treatment: str) -> list[ThresholdEstimate]:
    out = []
    for subject, rows in sorted(dataset.select(treatment).by_subject().items()):
        est = count_monotonicity_violations(rows, dataset.support, subject)
        if est is not None:
            out.append(est)
    return out


# ---------------------------------------------------------------------------
# frequencies


@dataclass(frozen=True)
class FrequencyRow:
    treatment: str
    group_size: int
    frequency: float
    std_error: float
    ci_low: float
    ci_high: float
    n_rows: int
    n_clusters: int
    note: str = ""


def clustered_mean(y, clusters) -> tuple[float, float]:
    """Mean of ``y`` and its cluster-robust standard error.

    Uses the sandwich estimator with the small-sample factor ``G / (G - 1)``;
    the error is NaN with a single cluster.
    """
    y = np.asarray(y, dtype=float)
    clusters = np.asarray(clusters)
    mean = float(y.mean())
    labels, inverse = np.unique(clusters, return_inverse=True)
    g = labels.size
    if g < 2:
        return mean, math.nan
    score = np.bincount(inverse, weights=y - mean)
    return mean, float(math.sqrt(g / (g - 1) * np.sum(score ** 2)) / y.size)


def frequency_summary(dataset: SubjectDataset, cluster: str = "session") -> list[FrequencyRow]:
    """Share of non-expert decisions to delegate or abstain, per treatment."""
    key = {"session": "session_id", "subject": "subject_id", "group": "group_id"}.get(cluster)
    if key is None:
        raise ValueError("cluster must be session, subject or group")
    cells: dict[tuple[str, int], list[DecisionRow]] = defaultdict(list)
    for r in dataset.rows:
        if r.role == "nonexpert":
            cells[(r.treatment, r.group_size)].append(r)
    out = []
    for (treatment, size), rows in sorted(cells.items()):
        y = [0.0 if r.cast else 1.0 for r in rows]
        ids = [getattr(r, key) or r.session_id for r in rows]
        mean, se = clustered_mean(y, ids)
        n_clusters = len(set(ids))
        note = "single cluster; interval undefined" if n_clusters < 2 else ""
        out.append(FrequencyRow(treatment, size, mean, se, mean - 1.96 * se, mean + 1.96 * se,
                                len(rows), n_clusters, note))
    return out


# ---------------------------------------------------------------------------
# disagreement statistic


def disagreement_counts(pairs) -> tuple[int, int, int]:
    """``(|D|, system correct on D, MV correct on D)`` for paired outcomes."""
    pairs = np.asarray(pairs, dtype=bool).reshape(-1, 2)
    d = pairs[:, 0] != pairs[:, 1]
    return int(d.sum()), int(pairs[d, 0].sum()), int(pairs[d, 1].sum())


def conditional_differential(pairs) -> float | None:
    """``2 gamma - 1`` over elections where the system and MV disagree.

    ``pairs`` holds ``(system_correct, mv_correct)`` per election.  Returns
    ``None`` when the two never disagree.
    """
    n, sys_right, _ = disagreement_counts(pairs)
    if n == 0:
        return None
    return 2 * sys_right / n - 1


# ---------------------------------------------------------------------------
# bootstrap


MAX_REDRAWS = 1000


@dataclass
class BootstrapDistribution:
    """One row per replication: system and MV correct frequencies and ``2 gamma - 1``.

    ``differential`` is NaN in replications without any disagreement.
    """

    system: str
    group_size: int
    freq_correct: np.ndarray
    freq_mv_correct: np.ndarray
    differential: np.ndarray
    n_disagree: np.ndarray
    n_disagree_system_correct: np.ndarray
    n_disagree_mv_correct: np.ndarray
    decisions_per_rep: int

    @property
    def reps(self) -> int:
        return int(self.freq_correct.size)

    def summary(self, bin_width: float = 0.02) -> dict:
        d = self.differential[~np.isnan(self.differential)]
        out = {
            "system": self.system,
            "group_size": self.group_size,
            "reps": self.reps,
            "decisions_per_rep": self.decisions_per_rep,
            "mean_freq_correct": float(self.freq_correct.mean()),
            "mean_freq_mv_correct": float(self.freq_mv_correct.mean()),
            "share_reps_without_disagreement": float(np.isnan(self.differential).mean()),
        }
        if d.size:
            # bins centred on multiples of bin_width
            n_half = int(round(1.0 / bin_width))
            centres = bin_width * np.arange(-n_half, n_half + 1)
            counts = np.bincount(np.rint(d / bin_width).astype(np.int64) + n_half, minlength=centres.size)
            k = int(np.argmax(counts))
            out.update(
                differential_mean=float(d.mean()),
                differential_mode=float(round(centres[k], 10)),
                mass_below_zero=float((d < 0).mean()),
                differential_quantiles={str(p): float(np.quantile(d, p)) for p in (0.05, 0.25, 0.5, 0.75, 0.95)},
            )
        return out

    def to_csv(self) -> str:
        lines = ["rep,freq_correct,freq_mv_correct,differential,n_disagree"]
        for i in range(self.reps):
            diff = "" if np.isnan(self.differential[i]) else f"{self.differential[i]:.6f}"
            lines.append(f"{i},{self.freq_correct[i]:.6f},{self.freq_mv_correct[i]:.6f},{diff},"
                         f"{self.n_disagree[i]}")
        return "\n".join(lines) + "\n"


@dataclass
class _Pool:
    """Choices of one treatment, flattened per subject and role."""

    n_subjects: int
    expert_start: np.ndarray
    expert_count: np.ndarray
    expert_correct: np.ndarray
    nonexpert_start: np.ndarray
    nonexpert_count: np.ndarray
    nonexpert_cast: np.ndarray
    nonexpert_correct: np.ndarray
    nonexpert_signal: np.ndarray
    against_rate: float


def _pool(dataset: SubjectDataset, treatment: str, group_size: int) -> _Pool:
    data = dataset.select(treatment, group_size)
    if not data.rows:
        raise ValueError(f"dataset has no rows for {treatment} with group size {group_size}")
    subjects = sorted(data.by_subject().items())
    e_start, e_count, e_correct = [], [], []
    n_start, n_count, n_cast, n_correct, n_signal = [], [], [], [], []
    for _, rows in subjects:
        rows = sorted(rows, key=lambda r: r.round)
        ex = [r for r in rows if r.role == "expert"]
        ne = [r for r in rows if r.role == "nonexpert"]
        e_start.append(len(e_correct))
        e_count.append(len(ex))
        e_correct += [bool(r.vote_correct) for r in ex]
        n_start.append(len(n_cast))
        n_count.append(len(ne))
        n_cast += [r.cast for r in ne]
        n_correct += [bool(r.vote_correct) if r.cast else False for r in ne]
        n_signal += [r.signal_correct for r in ne]
    if sum(e_count) == 0:
        raise ValueError(f"no subject was ever observed as an expert in {treatment}{group_size}")
    if sum(n_count) == 0:
        raise ValueError(f"no subject was ever observed as a non-expert in {treatment}{group_size}")
    cast = [r for r in data.rows if r.cast]
    against = sum(not r.vote_matches_signal for r in cast) / len(cast) if cast else 0.0
    arr = np.asarray
    return _Pool(len(subjects), arr(e_start), arr(e_count), arr(e_correct, bool),
                 arr(n_start), arr(n_count), arr(n_cast, bool), arr(n_correct, bool), arr(n_signal, bool),
                 float(against))


def _draw_in_role(rng, members: np.ndarray, count: np.ndarray, shape) -> np.ndarray:
    """Draw members uniformly, replacing those never seen in the role.

    ``members`` holds the 15 subject indices of each pseudo-session on its
    last axis.  A draw that lands on an ineligible subject is replaced by
    another draw from the same 15, which is a uniform draw among the
    eligible ones.
    """
    eligible = count[members] > 0
    n_ok = eligible.sum(axis=-1)
    order = np.argsort(~eligible, axis=-1, kind="stable")
    k = (rng.random(members.shape[:-1] + shape) * n_ok[(...,) + (None,) * len(shape)]).astype(np.int64)
    flat_order = order.reshape(order.shape[:-1] + (1,) * (len(shape) - 1) + (order.shape[-1],))
    slot = np.take_along_axis(np.broadcast_to(flat_order, k.shape[:-1] + (order.shape[-1],)), k, axis=-1)
    sub = np.broadcast_to(members.reshape(members.shape[:-1] + (1,) * (len(shape) - 1) + (members.shape[-1],)),
                          k.shape[:-1] + (members.shape[-1],))
    return np.take_along_axis(sub, slot, axis=-1)


def _sessions(rng, pool: _Pool, shape) -> np.ndarray:
    """Draw 15 subjects per pseudo-session; redraw sessions lacking a needed role."""
    members = rng.integers(pool.n_subjects, size=shape + (15,))
    for _ in range(MAX_REDRAWS):
        bad = ((pool.expert_count[members] > 0).sum(-1) == 0) | ((pool.nonexpert_count[members] > 0).sum(-1) == 0)
        if not bad.any():
            return members
        members[bad] = rng.integers(pool.n_subjects, size=(int(bad.sum()), 15))
    raise RuntimeError(f"could not form a pseudo-session with both roles in {MAX_REDRAWS} attempts")


def _bootstrap_block(pool: _Pool, treatment: str, group_size: int, reps: int, seed: int, block: int):
    rng = _rng.stream(seed, block, "bootstrap")
    n_sessions = 4 if group_size == 5 else 6
    members = _sessions(rng, pool, (reps, n_sessions))
    experts = _draw_in_role(rng, members, pool.expert_count, (20, 3))
    nonexperts = _draw_in_role(rng, members, pool.nonexpert_count, (20, 12))
    e_row = pool.expert_start[experts] + (rng.random(experts.shape) * pool.expert_count[experts]).astype(np.int64)
    n_row = pool.nonexpert_start[nonexperts] + (rng.random(nonexperts.shape)
                                                * pool.nonexpert_count[nonexperts]).astype(np.int64)
    e_right = pool.expert_correct[e_row]
    cast = pool.nonexpert_cast[n_row]
    right = pool.nonexpert_correct[n_row]
    flip = rng.random(n_row.shape) < pool.against_rate
    mv_right = np.where(cast, right, pool.nonexpert_signal[n_row] ^ flip)
    coin = rng.random(e_row.shape[:-1] + (3,)) < 0.5

    if group_size == 5:
        # three groups of one expert and four non-experts per round
        shape = e_right.shape[:-1] + (3, 4)
        cast, right, mv_right = (a.reshape(shape) for a in (cast, right, mv_right))
        e_right = e_right[..., None]
        target = np.zeros(shape, dtype=np.int64)
    else:
        shape = e_right.shape[:-1] + (1, 12)
        cast, right, mv_right = (a.reshape(shape) for a in (cast, right, mv_right))
        e_right = e_right[..., None, :]
        target = (rng.random(shape) * 3).astype(np.int64)
        coin = coin[..., :1]
    n_experts = e_right.shape[-1]

    margin_nonexpert = np.where(cast, np.where(right, 1, -1), 0).sum(-1)
    expert_sign = np.where(e_right, 1, -1)
    if treatment == System.LD:
        received = np.zeros(shape[:-1] + (n_experts,), dtype=np.int64)
        for j in range(n_experts):
            received[..., j] = ((~cast) & (target == j)).sum(-1)
        margin = margin_nonexpert + (expert_sign * (1 + received)).sum(-1)
    else:
        margin = margin_nonexpert + expert_sign.sum(-1)
    sys_right = np.where(margin == 0, coin, margin > 0)
    mv_margin = np.where(mv_right, 1, -1).sum(-1) + expert_sign.sum(-1)
    mv_ok = mv_margin > 0

    sys_right = sys_right.reshape(reps, -1)
    mv_ok = mv_ok.reshape(reps, -1)
    disagree = sys_right != mv_ok
    n_d = disagree.sum(-1)
    d_sys = (disagree & sys_right).sum(-1)
    d_mv = (disagree & mv_ok).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = np.where(n_d > 0, 2 * d_sys / np.maximum(n_d, 1) - 1, np.nan)
    return sys_right.mean(-1), mv_ok.mean(-1), diff, n_d, d_sys, d_mv, sys_right.shape[1]


def bootstrap_exp1(dataset: SubjectDataset, system: str, group_size: int, reps: int, seed: int,
                   threads: int = 1, block_size: int = 256) -> BootstrapDistribution:
    """Resample pseudo-sessions of 15 subjects and recompute group decisions.

    Every replication builds 240 decisions for groups of 5 (four sessions of
    20 rounds, three groups per round) or 120 for groups of 15 (six sessions
    of 20 rounds) from subjects drawn with replacement, each contributing
    choices from the role they are assigned.  The MV counterfactual imputes a
    vote for delegators and abstainers that follows their signal except with
    the treatment's observed rate of votes against the signal.
    """
    system = System.parse(system)
    if system == System.MV:
        raise ValueError("bootstrap compares LD or MVA with MV")
    if group_size not in (5, 15):
        raise ValueError("the resampling design covers groups of 5 or 15")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    pool = _pool(dataset, system, group_size)

    spans = list(_rng.blocks(reps, block_size))
    run = lambda s: _bootstrap_block(pool, system, group_size, s[2] - s[1], seed, s[0])  # noqa: E731
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    cat = [np.concatenate([p[i] for p in parts]) for i in range(6)]
    return BootstrapDistribution(system, group_size, *cat, decisions_per_rep=parts[0][6])


# ---------------------------------------------------------------------------
# KS test


def ks_two_sample(sample_a, sample_b, permutations: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Two-sample KS statistic with a label-permutation p-value."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    statistic = float(stats.ks_2samp(a, b, method="asymp").statistic)
    res = stats.permutation_test(
        (a, b), lambda x, y: stats.ks_2samp(x, y, method="asymp").statistic,
        permutation_type="independent", n_resamples=permutations, alternative="greater",
        random_state=_rng.stream(seed, 0, "permutation"),
    )
    return statistic, float(min(1.0, res.pvalue))


# ---------------------------------------------------------------------------
# synthetic data


def generate_synthetic(system: str, el: Electorate, dist: PrecisionDistribution, behavior,
                       n_sessions: int, seed: int, rounds: int = 20,
                       subjects_per_session: int = 15) -> SubjectDataset:
    """Sessions of ``subjects_per_session`` subjects playing ``rounds`` rounds.

    Each round the subjects are shuffled into groups of ``el.n_total``; the
    first ``el.n_experts`` seats of every group are the experts.  Every group
    election is simulated by the engine, so the data follow the model
    exactly.
    """
    system = System.parse(system)
    N = el.n_total
    if subjects_per_session % N:
        raise ValueError("subjects per session must be a multiple of the group size")
    groups = subjects_per_session // N
    n_elections = n_sessions * rounds * groups
    blk = simulate_block(system, el, dist, behavior, n_elections, seed, 0)
    seat_rng = _rng.stream(seed, 0, "synthetic")
    rows = []
    e = 0
    for s in range(n_sessions):
        for rnd in range(1, rounds + 1):
            seats = seat_rng.permutation(subjects_per_session)
            for g in range(groups):
                state = int(blk.state[e])
                for v in range(N):
                    subject = int(seats[g * N + v])
                    act = Action(int(blk.action[e, v]))
                    cast = act == Action.VOTE
                    rows.append(DecisionRow(
                        session_id=f"{system}{N}-s{s + 1}",
                        treatment=system,
                        group_size=N,
                        round=rnd,
                        subject_id=f"{system}{N}-s{s + 1}-p{subject + 1}",
                        role="expert" if v < el.n_experts else "nonexpert",
                        precision=float(blk.precision[e, v]),
                        signal_correct=bool(blk.signal[e, v] == state),
                        action="vote" if cast else ("delegate" if system == System.LD else "abstain"),
                        vote_matches_signal=bool(blk.votes[e, v] == blk.signal[e, v]) if cast else None,
                        state=state,
                        group_decision_correct=bool(blk.decision[e] == state),
                        group_id=f"{system}{N}-s{s + 1}-r{rnd}-g{g + 1}",
                    ))
                e += 1
    return SubjectDataset(rows, (dist.lo, max(dist.hi, el.expert_precision)))
