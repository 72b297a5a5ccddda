"""Command-line entry point: single runs and seed sweeps.

    bmaniac --scenario scenario.json --out results/ [--seed N] [--sweep N]
            [--strategy KIND] [--jobs N]

A single run writes ``metrics.csv``, ``trace.jsonl`` and ``models.txt``.
A sweep writes one such directory per seed plus ``metrics.csv`` (a row per
agent and seed, then a ``mean`` row per agent) and ``summary.csv`` (mean and
sample standard deviation per strategy over seeds).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import statistics
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, ScenarioConfig, load_scenario
from .engine import CSV_HEADER, MetricsReport, Simulation, _fmt
from .strategy import STRATEGY_KINDS


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_models(sim: Simulation) -> str:
    chunks = []
    for n, agent in sim.agents.items():
        if not agent.learns:
            continue
        chunks.append(agent.netq.to_text())
        chunks.append(f"## auction_model agent={n}\n")
        chunks.append(agent.aucm.table.to_text())
    return "".join(chunks)


def simulate(config: ScenarioConfig, out: Path | None, strategy: str | None = None) -> MetricsReport:
    """Run one instance; write its three output files when ``out`` is given."""
    sim = Simulation(config, strategy)
    buf = io.StringIO()
    for _ in range(config.ticks):
        for event in sim.advance():
            buf.write(event.to_json())
            buf.write("\n")
    report = sim.report()
    if out is not None:
        _atomic_write(out / "trace.jsonl", buf.getvalue())
        _atomic_write(out / "metrics.csv", report.to_csv())
        _atomic_write(out / "models.txt", dump_models(sim))
    return report


def _sweep_job(args):
    config, out, strategy = args
    return simulate(config, out, strategy)


def summarize(reports: list[MetricsReport]) -> list[dict]:
    """Mean and sample standard deviation over seeds, per strategy."""
    metrics = ("mean_profit", "delivery_ratio", "win_rate", "fallback_rate", "calibration_gap")
    per_kind: dict[str, dict[str, list[float]]] = {}
    for rep in reports:
        for kind, agg in rep.by_strategy().items():
            slot = per_kind.setdefault(kind, {m: [] for m in metrics})
            for m in metrics:
                if agg[m] is not None:
                    slot[m].append(agg[m])
        overall = per_kind.setdefault("*", {m: [] for m in metrics})
        if rep.delivery_ratio is not None:
            overall["delivery_ratio"].append(rep.delivery_ratio)
    rows = []
    for kind in sorted(per_kind):
        row = {"strategy": kind, "seeds": len(reports)}
        for m, values in per_kind[kind].items():
            row[f"{m}_mean"] = statistics.fmean(values) if values else None
            row[f"{m}_sd"] = statistics.stdev(values) if len(values) > 1 else None
        rows.append(row)
    return rows


def run_sweep(config: ScenarioConfig, out: Path, n_seeds: int, first_seed: int = 1,
              strategy: str | None = None, jobs: int = 1) -> list[MetricsReport]:
    seeds = list(range(first_seed, first_seed + n_seeds))
    tasks = [(config.replace(seed=s), out / f"seed_{s}", strategy) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_sweep_job, tasks))
    else:
        reports = [_sweep_job(t) for t in tasks]

    lines = [",".join(("seed",) + CSV_HEADER)]
    for seed, rep in zip(seeds, reports):
        lines += [",".join(_fmt(x) for x in (seed,) + row) for row in rep.csv_rows()]
    for i, agent in enumerate(reports[0].agents):
        column = [rep.agents[i] for rep in reports]
        gaps = [a.calibration_gap for a in column if a.calibration_gap is not None]
        row = (
            "mean", agent.strategy, agent.agent,
            statistics.fmean(a.profit for a in column),
            statistics.fmean(a.deliveries for a in column),
            statistics.fmean(a.wins for a in column),
            statistics.fmean(a.bids for a in column),
            statistics.fmean(a.fallbacks for a in column),
            statistics.fmean(gaps) if gaps else None,
        )
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(out / "metrics.csv", "\n".join(lines) + "\n")

    rows = summarize(reports)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    _atomic_write(out / "summary.csv", buf.getvalue())
    return reports


def run_scenario(config: ScenarioConfig, out: str | Path, sweep: int | None = None,
                 strategy: str | None = None, jobs: int = 1) -> int:
    """Run and write outputs; returns a process exit status."""
    out = Path(out)
    try:
        if sweep:
            run_sweep(config, out, sweep, first_seed=config.seed, strategy=strategy, jobs=jobs)
        else:
            simulate(config, out, strategy)
    except OSError as exc:
        print(f"bmaniac: cannot write results to {out}: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmaniac", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed (first seed of a sweep)")
    p.add_argument("--sweep", type=int, metavar="N_SEEDS",
                   help="run N_SEEDS independent seeds starting at --seed (default 1)")
    p.add_argument("--strategy", choices=STRATEGY_KINDS, help="use this strategy for every agent")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_scenario(Path(args.scenario))
    except OSError as exc:
        print(f"bmaniac: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"bmaniac: invalid scenario: {exc}", file=sys.stderr)
        return 1
    if args.sweep is not None and args.sweep < 1:
        print("bmaniac: --sweep needs at least one seed", file=sys.stderr)
        return 1
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    elif args.sweep:
        config = config.replace(seed=1)
    return run_scenario(config, args.out, sweep=args.sweep, strategy=args.strategy, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
