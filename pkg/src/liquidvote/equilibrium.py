"""Equilibrium thresholds for delegation (LD) and abstention (MVA) games."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic
from .model import Electorate, PrecisionDistribution, System, describe_distribution

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
RESIDUAL_TOL = 1e-8
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class InteriorThreshold:
    threshold: float
    mass_below: float
    ex_ante_eu: float
    residual: float
    strict: bool
    atom_stay_out: float | None = None


@dataclass(frozen=True)
class BoundaryEquilibrium:
    threshold: float
    ex_ante_eu: float
    is_equilibrium: bool
    deviation_gain: float


@dataclass
class EquilibriumReport:
    system: str
    electorate: Electorate
    distribution: str
    interior_thresholds: list[InteriorThreshold]
    boundary_equilibria: list[BoundaryEquilibrium]
    eu_mv_baseline: float
    diagnostics: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "electorate": asdict(self.electorate),
            "distribution": self.distribution,
            "interior_thresholds": [asdict(t) for t in self.interior_thresholds],
            "boundary_equilibria": [asdict(b) for b in self.boundary_equilibria],
            "eu_mv_baseline": self.eu_mv_baseline,
            "diagnostics": list(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def table(self) -> str:
        """Rows of threshold, mass below it, ex-ante EU and the MV baseline."""
        el = self.electorate
        lines = [f"{self.system}: N={el.n_total} K={el.n_experts} p={el.expert_precision} "
                 f"F={self.distribution}",
                 f"{'threshold':>10} {'F':>6} {'EU':>7} {'EU_MV':>7}  kind"]
        rows = [(b.threshold, None, b.ex_ante_eu, "boundary" + ("" if b.is_equilibrium else " (not eq.)"))
                for b in self.boundary_equilibria]
        rows += [(t.threshold, t.mass_below, t.ex_ante_eu, "interior" + (" strict" if t.strict else ""))
                 for t in self.interior_thresholds]
        for thr, mass, eu, kind in sorted(rows, key=lambda r: -r[0]):
            mass_s = f"{mass:6.3f}" if mass is not None else "     -"
            lines.append(f"{thr:10.3f} {mass_s} {eu:7.3f} {self.eu_mv_baseline:7.3f}  {kind}")
        return "\n".join(lines)


def _bisect(f, a: float, b: float, fa: float) -> tuple[float, float]:
    mid, fm = a, fa
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = float(f(mid))
        if fm == 0.0 or b - a < 1e-14:
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return mid, fm


@dataclass(frozen=True)
class _Root:
    threshold: float
    atom_stay_out: float | None = None


def _components(system):
    return analytic.ld_components if system == System.LD else analytic.mva_components


def _mixed_gap(system, el, dist, index: int):
    """Indifference gap of the atom type when a fraction of its mass stays out."""
    a = float(dist.points[index])

    def gap(stay_out):
        participate, mean_vote = dist.mixed_tail(index, stay_out)
        base, slope, out = _components(system)(el, participate, mean_vote)
        return float(base[0] + slope[0] * a - out[0])
    return gap


def find_interior_roots(system: str, el: Electorate, dist: PrecisionDistribution,
                        tol: float = DEFAULT_TOL) -> tuple[list[_Root], list[str]]:
    """Sign changes of the indifference gap on the open support, refined by bisection.

    The gap is scanned on a grid of step ``tol / 10``; runs of exact zeros
    (e.g. no voter is ever pivotal) are skipped.  For atomic laws a sign
    change can sit on a jump of the gap at an atom; the equilibrium there has
    that atom's type mixing, and the mixing fraction is solved for instead.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    system = System.parse(system)
    lo, hi = dist.lo, dist.hi
    notes: list[str] = []
    if hi - lo <= tol:
        notes.append("support too narrow for an interior threshold")
        return [], notes
    n = int(np.ceil((hi - lo) / (tol / 10)))
    grid = np.linspace(lo, hi, n + 1)[1:-1]
    values = analytic.indifference_gap(system, el, dist, grid)

    def gap(x):
        return analytic.indifference_gap(system, el, dist, x)[0]

    roots: list[_Root] = []
    nonzero = np.flatnonzero(values != 0.0)
    signs = np.sign(values[nonzero])
    for j in np.flatnonzero(signs[:-1] * signs[1:] < 0):
        ia, ib = nonzero[j], nonzero[j + 1]
        root, residual = _bisect(gap, float(grid[ia]), float(grid[ib]), float(values[ia]))
        if abs(residual) < RESIDUAL_TOL:
            roots.append(_Root(root))
            continue
        points = getattr(dist, "points", None)
        if points is not None:
            index = int(np.argmin(np.abs(points - root)))
            mixed = _mixed_gap(system, el, dist, index)
            g0 = mixed(0.0)
            if np.sign(g0) != np.sign(mixed(1.0)):
                share, residual = _bisect(mixed, 0.0, 1.0, g0)
                if abs(residual) < RESIDUAL_TOL:
                    roots.append(_Root(float(points[index]), share))
                    continue
        notes.append(f"sign change across a discontinuity near {root:.6f} (gap {residual:.3g})")
    if not roots:
        notes.append("no interior sign change of the indifference condition")
    return sorted(roots, key=lambda r: r.threshold), notes


def _interior(system, el, dist, roots: list[_Root]) -> list[InteriorThreshold]:
    out = []
    for r in roots:
        if r.atom_stay_out is None:
            participate, mean_vote = dist.upper_tail(r.threshold)
            mass_below = float(dist.prob_below(r.threshold))
        else:
            index = int(np.argmin(np.abs(dist.points - r.threshold)))
            participate, mean_vote = dist.mixed_tail(index, r.atom_stay_out)
            mass_below = 1.0 - participate
        base, slope, out_value = _components(system)(el, participate, mean_vote)
        eu = (1 - participate) * out_value[0] + participate * (base[0] + slope[0] * mean_vote)
        out.append(InteriorThreshold(
            threshold=r.threshold,
            mass_below=mass_below,
            ex_ante_eu=float(eu),
            residual=float(base[0] + slope[0] * r.threshold - out_value[0]),
            strict=bool(slope[0] > 0) and r.atom_stay_out is None,
            atom_stay_out=r.atom_stay_out,
        ))
    return out


def solve_interior_ld(el: Electorate, dist: PrecisionDistribution, tol: float = DEFAULT_TOL) -> list[float]:
    roots, notes = find_interior_roots(System.LD, el, dist, tol)
    for note in notes:
        log.info("LD N=%d K=%d: %s", el.n_total, el.n_experts, note)
    return [r.threshold for r in roots]


def solve_interior_mva(el: Electorate, dist: PrecisionDistribution, tol: float = DEFAULT_TOL) -> list[float]:
    roots, notes = find_interior_roots(System.MVA, el, dist, tol)
    for note in notes:
        log.info("MVA N=%d K=%d: %s", el.n_total, el.n_experts, note)
    return [r.threshold for r in roots]


def check_boundary_equilibria(system: str, el: Electorate,
                              dist: PrecisionDistribution) -> list[BoundaryEquilibrium]:
    """Best-response check at the two corner profiles.

    At the lower corner everyone votes, so the profile survives iff no type
    gains by staying out; the best candidate deviator is the lowest type.  At
    the upper corner nobody votes and the best candidate is the highest type.
    """
    system = System.parse(system)
    comps = _components(system)
    out = []
    for corner, deviator in ((dist.lo, dist.lo), (dist.hi, dist.hi)):
        participate, mean_vote = (1.0, dist.mean()) if corner == dist.lo else (0.0, dist.hi)
        base, slope, stay_out = comps(el, participate, mean_vote)
        vote_value = float(base[0] + slope[0] * deviator)
        stay_value = float(stay_out[0])
        if corner == dist.lo:
            gain = stay_value - vote_value
            eu = float(base[0] + slope[0] * mean_vote)
        else:
            gain = vote_value - stay_value
            eu = stay_value
        out.append(BoundaryEquilibrium(corner, eu, gain <= BOUNDARY_TOL, gain))
    return out


def solve(system: str, el: Electorate, dist: PrecisionDistribution,
          tol: float = DEFAULT_TOL) -> EquilibriumReport:
    system = System.parse(system)
    if system == System.MV:
        raise ValueError("universal majority voting has no threshold to solve for")
    roots, notes = find_interior_roots(system, el, dist, tol)
    return EquilibriumReport(
        system=system,
        electorate=el,
        distribution=describe_distribution(dist),
        interior_thresholds=_interior(system, el, dist, roots),
        boundary_equilibria=check_boundary_equilibria(system, el, dist),
        eu_mv_baseline=analytic.eu_mv(el, dist),
        diagnostics=notes,
    )


@dataclass
class SweepCurve:
    system: str
    threshold: np.ndarray
    eu: np.ndarray
    eu_ratio: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "eu", "eu_ratio"])
        for t, e, r in zip(self.threshold, self.eu, self.eu_ratio):
            w.writerow([f"{t:.6f}", f"{e:.12f}", f"{r:.12f}"])
        return buf.getvalue()

    @property
    def peak(self) -> float:
        return float(self.threshold[int(np.argmax(self.eu))])

    def loss_gain_ratio(self) -> float:
        """Largest loss relative to MV divided by the largest gain."""
        gain = float(self.eu_ratio.max() - 1.0)
        loss = float(1.0 - self.eu_ratio.min())
        return np.inf if gain <= 0 else loss / gain


def robustness_sweep(system: str, el: Electorate, dist: PrecisionDistribution, grid) -> SweepCurve:
    """Ex-ante utility relative to MV along a grid of common thresholds."""
    system = System.parse(system)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < dist.lo - 1e-12) or np.any(grid > dist.hi + 1e-12):
        raise ValueError("sweep grid must lie inside the precision support")
    eu = analytic.ex_ante_curve(system, el, dist, grid)
    return SweepCurve(system, grid, eu, eu / analytic.eu_mv(el, dist))


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:step`` -> inclusive grid."""
    lo, hi, step = (float(x) for x in spec.split(":"))
    n = int(round((hi - lo) / step))
    return np.linspace(lo, hi, n + 1)
