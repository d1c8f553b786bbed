"""Command-line entry point.

Every subcommand takes its options from flags or from a JSON/YAML file given
with ``--config`` (flags win), writes its outputs to ``--out`` and leaves a
``manifest.json`` there.  A manifest can be passed back as ``--config`` to
repeat the run.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, analysis, equilibrium, montecarlo
from .model import (
    BehavioralProfile,
    Electorate,
    StrategyProfileLD,
    StrategyProfileMVA,
    System,
    parse_distribution,
)

log = logging.getLogger("liquidvote")

DEFAULTS = {
    "p": 0.7,
    "dist": "uniform:0.5:0.7",
    "tol": equilibrium.DEFAULT_TOL,
    "grid": "0.5:0.7:0.002",
    "reps": 100_000,
    "seed": 0,
    "threads": 1,
    "against": 0.0,
    "sizes": "5,15,125",
    "coherence": 0.05,
    "delegate_rate": 0.5,
    "abstain_rate": 0.3,
    "group_size": 5,
    "cluster": "session",
    "support": "0.5:0.7",
    "permutations": 10_000,
    "sessions": 100,
    "rounds": 20,
    "out": ".",
}

NEEDS = {
    "equilibrium": ["system", "n", "k"],
    "sweep": ["system", "n", "k"],
    "simulate": ["system", "n", "k"],
    "compare": [],
    "bootstrap": ["input", "system"],
    "analyze": ["input"],
    "gen-synthetic": ["system", "n", "k", "threshold"],
}


class UsageError(Exception):
    pass


def blob_hash(data: bytes) -> str:
    """Content hash in the form git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    p.add_argument("--config", help="JSON or YAML file with option values; flags win")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    opts = {
        "system": dict(help="ld, mva or mv"),
        "n": dict(type=int, help="electorate size N"),
        "k": dict(type=int, help="number of experts K"),
        "p": dict(type=float, help="expert precision"),
        "dist": dict(help="uniform:lo:hi, binned:lo:hi:width or point:q"),
        "seed": dict(type=int),
        "reps": dict(type=int),
        "threads": dict(type=int, help="worker threads; results do not depend on it"),
    }
    for name in names:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, **opts.get(name, {}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liquidvote", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", help="interior and boundary equilibrium thresholds")
    _common(p, "system", "n", "k", "p", "dist")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("sweep", help="ex-ante utility relative to MV over a threshold grid")
    _common(p, "system", "n", "k", "p", "dist")
    p.add_argument("--grid", help="lo:hi:step")

    p = sub.add_parser("simulate", help="Monte Carlo batch of elections")
    _common(p, "system", "n", "k", "p", "dist", "seed", "reps", "threads")
    p.add_argument("--threshold", type=float, help="common delegation/abstention threshold")
    p.add_argument("--threshold-law", dest="threshold_law", help="distribution of individual thresholds")
    p.add_argument("--against", type=float, help="rate of votes cast against the signal")
    p.add_argument("--audit", help="write one JSON line per election to this file")

    p = sub.add_parser("compare", help="LD, MVA and MV on a heterogeneous-accuracy population")
    _common(p, "seed", "reps", "threads")
    p.add_argument("--sizes", help="comma-separated group sizes")
    p.add_argument("--coherence", type=float, help="0.05 or 0.03")
    p.add_argument("--delegate-rate", dest="delegate_rate", type=float)
    p.add_argument("--abstain-rate", dest="abstain_rate", type=float)

    p = sub.add_parser("bootstrap", help="subject-level bootstrap of group decisions")
    _common(p, "system", "seed", "reps", "threads")
    p.add_argument("--input", help="decision CSV")
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--support", help="declared precision support lo:hi")

    p = sub.add_parser("analyze", help="frequencies, threshold estimates and KS tests")
    _common(p, "seed")
    p.add_argument("--input", help="decision CSV")
    p.add_argument("--cluster", help="session, subject or group")
    p.add_argument("--support", help="declared precision support lo:hi")
    p.add_argument("--permutations", type=int)

    p = sub.add_parser("gen-synthetic", help="decision CSV simulated at a threshold profile")
    _common(p, "system", "n", "k", "p", "dist", "seed")
    p.add_argument("--threshold", type=float)
    p.add_argument("--against", type=float)
    p.add_argument("--sessions", type=int)
    p.add_argument("--rounds", type=int)
    return parser


def _load_config(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith((".yml", ".yaml")):
        import yaml
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    if "config" in data and "command" in data:
        data = data["config"]
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (in increasing priority)."""
    cfg = {k: v for k, v in DEFAULTS.items() if k in vars(args)}
    if args.config:
        try:
            loaded = _load_config(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(vars(args)) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
    cfg.update({k: v for k, v in vars(args).items()
                if v is not None and k not in ("config", "command", "verbose")})
    missing = [k for k in NEEDS[args.command] if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


# ---------------------------------------------------------------------------
# commands


def _electorate(cfg) -> Electorate:
    return Electorate(int(cfg["n"]), int(cfg["k"]), float(cfg["p"]))


def _behavior(cfg, dist):
    system = System.parse(cfg["system"])
    if system == System.MV:
        return None
    against = float(cfg.get("against") or 0.0)
    if cfg.get("threshold_law"):
        return BehavioralProfile(parse_distribution(cfg["threshold_law"]), against)
    if cfg.get("threshold") is None:
        raise UsageError(f"{system} needs --threshold or --threshold-law")
    t = float(cfg["threshold"])
    if against:
        return BehavioralProfile.symmetric(t, against)
    return StrategyProfileLD(t) if system == System.LD else StrategyProfileMVA(t)


def _support(cfg) -> tuple[float, float]:
    lo, hi = (float(x) for x in str(cfg["support"]).split(":"))
    return lo, hi


def _read_dataset(cfg):
    path = cfg["input"]
    with open(path, newline="", encoding="utf-8") as fh:
        result = analysis.ingest(fh, _support(cfg))
    for err in result.errors:
        log.warning("%s: %s", path, err)
    return result


def cmd_equilibrium(cfg, out: dict) -> str:
    report = equilibrium.solve(cfg["system"], _electorate(cfg), parse_distribution(cfg["dist"]), float(cfg["tol"]))
    out["equilibrium.json"] = report.dumps() + "\n"
    out["equilibrium.txt"] = report.table() + "\n"
    return report.table()


def cmd_sweep(cfg, out: dict) -> str:
    curve = equilibrium.robustness_sweep(cfg["system"], _electorate(cfg), parse_distribution(cfg["dist"]),
                                         equilibrium.parse_grid(cfg["grid"]))
    out["sweep.csv"] = curve.to_csv()
    return f"peak at {curve.peak:.4f}; max loss / max gain = {curve.loss_gain_ratio():.3f}"


def cmd_simulate(cfg, out: dict) -> str:
    el, dist = _electorate(cfg), parse_distribution(cfg["dist"])
    audit = open(cfg["audit"], "w", encoding="utf-8") if cfg.get("audit") else None
    try:
        res = montecarlo.simulate_batch(cfg["system"], el, dist, _behavior(cfg, dist), int(cfg["reps"]),
                                        int(cfg["seed"]), threads=int(cfg["threads"]), audit=audit)
    finally:
        if audit is not None:
            audit.close()
    out["simulate.json"] = json.dumps(res.to_json(), indent=2, sort_keys=True) + "\n"
    return f"{res.system}: freq_correct {res.freq_correct:.4f} (s.e. {res.std_error:.4f}) over {res.n_elections}"


def cmd_compare(cfg, out: dict) -> str:
    sizes = [int(s) for s in str(cfg["sizes"]).split(",")]
    comp = montecarlo.compare_systems(
        montecarlo.AccuracyPopulation.calibrated(float(cfg["coherence"])), sizes,
        montecarlo.PopulationBehavior(float(cfg["delegate_rate"]), float(cfg["abstain_rate"])),
        int(cfg["reps"]), int(cfg["seed"]), threads=int(cfg["threads"]))
    out["compare.csv"] = comp.to_csv()
    out["compare.json"] = comp.dumps() + "\n"
    return comp.to_csv().rstrip()


def cmd_bootstrap(cfg, out: dict) -> str:
    data = _read_dataset(cfg).dataset
    dist = analysis.bootstrap_exp1(data, cfg["system"], int(cfg["group_size"]), int(cfg["reps"]),
                                   int(cfg["seed"]), threads=int(cfg["threads"]))
    summary = dist.summary()
    out["bootstrap.csv"] = dist.to_csv()
    out["bootstrap_summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    return json.dumps(summary, indent=2, sort_keys=True)


def cmd_analyze(cfg, out: dict) -> str:
    result = _read_dataset(cfg)
    data = result.dataset
    out["ingest_errors.txt"] = "".join(f"{e}\n" for e in result.errors)
    freq = analysis.frequency_summary(data, cfg["cluster"])
    lines = ["treatment,group_size,frequency,std_error,ci_low,ci_high,n_rows,n_clusters,note"]
    lines += [f"{r.treatment},{r.group_size},{r.frequency:.6f},{r.std_error:.6f},{r.ci_low:.6f},"
              f"{r.ci_high:.6f},{r.n_rows},{r.n_clusters},{r.note}" for r in freq]
    out["frequencies.csv"] = "\n".join(lines) + "\n"

    lines = ["treatment,group_size,subject_id,min_violation_count,range_low,range_high,threshold_mean,n_rows"]
    means: dict[tuple[str, int], list[float]] = {}
    for size in sorted({r.group_size for r in data.rows}):
        for treatment in (System.LD, System.MVA):
            sub = data.select(treatment, size)
            for est in analysis.threshold_estimates(sub, treatment):
                lines.append(f"{treatment},{size},{est.subject_id},{est.min_violation_count},"
                             f"{est.threshold_range[0]:.6f},{est.threshold_range[1]:.6f},"
                             f"{est.threshold_mean:.6f},{est.n_rows}")
                means.setdefault((treatment, size), []).append(est.threshold_mean)
    out["thresholds.csv"] = "\n".join(lines) + "\n"

    ks = {}
    for size in sorted({s for _, s in means}):
        a, b = means.get((System.LD, size)), means.get((System.MVA, size))
        if a and b:
            stat, pval = analysis.ks_two_sample(a, b, int(cfg["permutations"]), int(cfg["seed"]))
            ks[str(size)] = {"statistic": stat, "p_value": pval, "n_ld": len(a), "n_mva": len(b)}
    out["ks.json"] = json.dumps(ks, indent=2, sort_keys=True) + "\n"
    return out["frequencies.csv"].rstrip()


def cmd_gen_synthetic(cfg, out: dict) -> str:
    el, dist = _electorate(cfg), parse_distribution(cfg["dist"])
    data = analysis.generate_synthetic(cfg["system"], el, dist, _behavior(cfg, dist), int(cfg["sessions"]),
                                       int(cfg["seed"]), rounds=int(cfg["rounds"]))
    out["synthetic.csv"] = data.to_csv()
    return f"{len(data)} rows"


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "bootstrap": cmd_bootstrap,
    "analyze": cmd_analyze,
    "gen-synthetic": cmd_gen_synthetic,
}


def _manifest(command: str, cfg: dict, outputs: dict) -> str:
    inputs = {}
    for key in ("input", "config"):
        if cfg.get(key):
            inputs[str(cfg[key])] = blob_hash(Path(cfg[key]).read_bytes())
    saved = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads", "config")}
    return json.dumps({
        "command": command,
        "config": saved,
        "inputs": inputs,
        "outputs": {name: blob_hash(text.encode()) for name, text in sorted(outputs.items())},
        "version": __version__,
    }, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        if cfg.get("system"):
            cfg["system"] = System.parse(cfg["system"])
    except (UsageError, ValueError) as exc:
        parser.error(f"{args.command}: {exc}")
    outputs: dict[str, str] = {}
    try:
        message = COMMANDS[args.command](cfg, outputs)
    except UsageError as exc:
        parser.error(f"{args.command}: {exc}")
    except (ValueError, TypeError) as exc:
        print(f"liquidvote {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"liquidvote {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        (out_dir / name).write_text(text, encoding="utf-8")
    (out_dir / "manifest.json").write_text(_manifest(args.command, cfg, outputs), encoding="utf-8")
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
