"""Brute-force reference values, written without touching the package.

Every random element of an election is listed outcome by outcome and the
probability of a correct decision is summed explicitly.  Slow on purpose.
"""
from __future__ import annotations

import math
from itertools import product

from scipy import integrate


def atoms_law(points, weights=None):
    """A finite precision law as a list of ``(weight, q)`` pairs."""
    if weights is None:
        weights = [1.0 / len(points)] * len(points)
    return [(float(w), float(q)) for q, w in zip(points, weights)]


def _atom_outcomes(law, threshold, n_experts, stay_out_target):
    """Outcomes of one other non-expert, one entry per (atom, outcome).

    An entry is ``(prob, kind, payload)``: ``("vote", correct)`` or
    ``("out", expert_index)``; for abstention the expert index is ``None``.
    """
    rows = []
    for w, q in law:
        if q < threshold:
            if stay_out_target:
                rows += [(w / n_experts, "out", e) for e in range(n_experts)]
            else:
                rows.append((w, "out", None))
        else:
            rows += [(w * q, "vote", True), (w * (1 - q), "vote", False)]
    return rows


def _uniform_outcomes(lo, hi, threshold, n_experts, stay_out_target):
    """Same as ``_atom_outcomes`` for a uniform law, masses from quadrature."""
    dens = 1.0 / (hi - lo)
    t = min(max(threshold, lo), hi)
    p_out = integrate.quad(lambda q: dens, lo, t, epsabs=1e-14)[0] if t > lo else 0.0
    right = integrate.quad(lambda q: q * dens, t, hi, epsabs=1e-14)[0] if t < hi else 0.0
    wrong = integrate.quad(lambda q: (1 - q) * dens, t, hi, epsabs=1e-14)[0] if t < hi else 0.0
    rows = [(right, "vote", True), (wrong, "vote", False)]
    if stay_out_target:
        rows += [(p_out / n_experts, "out", e) for e in range(n_experts)]
    else:
        rows.append((p_out, "out", None))
    return rows


def outcomes(law, threshold, n_experts, system):
    """Outcome table for one other non-expert under either law format."""
    ld = system == "LD"
    if isinstance(law, tuple) and law[0] == "uniform":
        return _uniform_outcomes(law[1], law[2], threshold, n_experts, ld)
    return _atom_outcomes(law, threshold, n_experts, ld)


def _focal_rows(focal, n_experts, system):
    if focal == "out":
        if system == "LD":
            return [(1.0 / n_experts, "out", e) for e in range(n_experts)]
        return [(1.0, "out", None)]
    return [(focal, "vote", True), (1 - focal, "vote", False)]


def _win_probability(system, expert_right, rows, n_total):
    if system == "LD":
        correct = 0
        for e, right in enumerate(expert_right):
            if right:
                correct += 1 + sum(1 for kind, pay in rows if kind == "out" and pay == e)
        correct += sum(1 for kind, pay in rows if kind == "vote" and pay)
        return 1.0 if 2 * correct > n_total else 0.0
    cast = len(expert_right) + sum(1 for kind, _ in rows if kind == "vote")
    correct = sum(expert_right) + sum(1 for kind, pay in rows if kind == "vote" and pay)
    if 2 * correct == cast:
        return 0.5
    return 1.0 if 2 * correct > cast else 0.0


def interim(system, n_total, n_experts, p, law, threshold, focal):
    """Probability of a correct decision for a focal non-expert.

    ``focal`` is her precision if she votes, or ``"out"`` if she delegates
    (LD) or abstains (MVA).  Others follow the threshold rule.
    """
    others = n_total - n_experts - 1
    table = outcomes(law, threshold, n_experts, system)
    focal_rows = _focal_rows(focal, n_experts, system)
    terms = []
    for expert_right in product((True, False), repeat=n_experts):
        pe = math.prod(p if r else 1 - p for r in expert_right)
        for fw, fk, fp in focal_rows:
            for combo in product(table, repeat=others):
                prob = pe * fw * math.prod(c[0] for c in combo)
                if prob == 0.0:
                    continue
                rows = [(fk, fp)] + [(c[1], c[2]) for c in combo]
                terms.append(prob * _win_probability(system, expert_right, rows, n_total))
    return math.fsum(terms)


def ex_ante(system, n_total, n_experts, p, atoms, threshold):
    """Ex-ante probability of a correct decision for a finite law."""
    out_value = interim(system, n_total, n_experts, p, atoms, threshold, "out")
    terms = []
    for w, q in atoms:
        if q < threshold:
            terms.append(w * out_value)
        else:
            terms.append(w * interim(system, n_total, n_experts, p, atoms, threshold, q))
    return math.fsum(terms)


def majority_vote(n_total, n_experts, p, mean_q):
    """Sincere universal voting by listing every signal profile."""
    terms = []
    for sig in product((True, False), repeat=n_total):
        prob = math.prod((p if s else 1 - p) if i < n_experts else (mean_q if s else 1 - mean_q)
                         for i, s in enumerate(sig))
        terms.append(prob * (2 * sum(sig) > n_total))
    return math.fsum(terms)


def nested_sum_ld(n_nonexperts, p, participate, mean_vote, q_i=None):
    """Three-expert LD utility as the literal multinomial sum over allocations.

    ``q_i=None`` gives the delegating focal voter, otherwise she votes with
    precision ``q_i``.  Others vote with probability ``participate`` and then
    are right with probability ``mean_vote``.
    """
    K = 3
    N = n_nonexperts + K
    others = n_nonexperts - 1
    delegating_focal = q_i is None
    terms = []
    for z in range(others + 1):
        pz = math.comb(others, z) * participate ** z * (1 - participate) ** (others - z)
        d = others - z + (1 if delegating_focal else 0)
        for cn in range(z + 1):
            pc = math.comb(z, cn) * mean_vote ** cn * (1 - mean_vote) ** (z - cn)
            for right in product((0, 1), repeat=K):
                pe = math.prod(p if r else 1 - p for r in right)
                for x1 in range(d + 1):
                    for x2 in range(d - x1 + 1):
                        x3 = d - x1 - x2
                        alloc = math.factorial(d) / (math.factorial(x1) * math.factorial(x2)
                                                     * math.factorial(x3)) / K ** d
                        expert_votes = sum((1 + x) * r for x, r in zip((x1, x2, x3), right))
                        base = pz * pc * pe * alloc
                        if delegating_focal:
                            terms.append(base * (2 * (cn + expert_votes) > N))
                        else:
                            terms.append(base * (q_i * (2 * (cn + 1 + expert_votes) > N)
                                                 + (1 - q_i) * (2 * (cn + expert_votes) > N)))
    return math.fsum(terms)


def uniform_status(lo, hi, threshold):
    """``(P(q >= t), E[q | q >= t])`` for a uniform law, by quadrature."""
    dens = 1.0 / (hi - lo)
    mass = integrate.quad(lambda q: dens, threshold, hi, epsabs=1e-14)[0]
    first = integrate.quad(lambda q: q * dens, threshold, hi, epsabs=1e-14)[0]
    return mass, (first / mass if mass > 0 else hi)
