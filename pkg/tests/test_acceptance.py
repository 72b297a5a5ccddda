"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they are
also repeated in the terminal summary of any pytest run.
"""

import statistics
import time

import numpy as np

from bmaniac.cli import run_sweep, simulate
from bmaniac.core_bayes import ABSENT, FrequencyTable, IndeterminatePosteriorError
from bmaniac.engine import Simulation
from bmaniac.net_quality import NetQualityModel
from bmaniac.strategy import BackboneFallback, Bid, decide_bid
from bmaniac.topology import ChurnParams, Scenario, derive_view, step_churn
from conftest import ACCEPTANCE_LINES, mixed_config, random_graph
from instances import BACKBONE, OBSERVER, random_instance
from oracles import brute_force_bid, nb_posterior_bruteforce


def report(num, name, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def random_table(rng, alpha, max_features=4, max_values=5):
    k = int(rng.integers(2, 4))
    classes = [f"c{i}" for i in range(k)]
    specs = []
    for j in range(int(rng.integers(1, max_features + 1))):
        size = int(rng.integers(1, max_values + 1))
        specs.append((f"f{j}", [f"v{v}" for v in range(size)]))
    table = FrequencyTable(classes, specs, alpha=alpha)
    domains = {name: list(vals) + [ABSENT] for name, vals in specs}
    observations = []
    for _ in range(int(rng.integers(0, 30))):
        c = classes[int(rng.integers(k))]
        ev = {f: vals[int(rng.integers(len(vals)))] for f, vals in domains.items()}
        table.observe(c, ev)
        observations.append((c, ev))
    evidence = {f: vals[int(rng.integers(len(vals)))]
                for f, vals in domains.items() if rng.random() < 0.7}
    return table, classes, domains, observations, evidence


# -- 1 --------------------------------------------------------------------


def test_criterion_1_nb_oracle_equivalence():
    rng = np.random.default_rng(101)
    cases = [random_table(rng, alpha=float(i % 2)) for i in range(600)]
    worst, mismatches, indeterminate, elapsed = 0.0, 0, 0, 0.0
    for table, classes, domains, obs, ev in cases:
        for c in classes:
            expected = nb_posterior_bruteforce(obs, classes, domains, table.alpha, ev, c)
            t0 = time.perf_counter()
            try:
                got = table.posterior(c, ev)
            except IndeterminatePosteriorError:
                got = None
            elapsed += time.perf_counter() - t0
            if expected is None or got is None:
                indeterminate += 1
                mismatches += (expected is None) != (got is None)
                continue
            worst = max(worst, abs(got - expected))
    ok = len(cases) >= 500 and worst <= 1e-12 and mismatches == 0 and elapsed < 10
    report(1, "NB posterior equals brute-force joint", ok,
           f"{len(cases)} tables, max |d|={worst:.2e}, zero-mass cases={indeterminate}, "
           f"posterior time {elapsed:.3f}s")
    assert ok


# -- 2 --------------------------------------------------------------------


def test_criterion_2_literal_posterior():
    # P(C)=0.8, P(f=A|C)=0.5, P(h=2|C)=0.4, P(f=A)=0.5, P(h=2)=0.5
    t = FrequencyTable(["C", "notC"], [("f", ["A", "B"]), ("h", [1, 2])], alpha=0)
    for i in range(40):
        t.observe("C", {"f": "A" if i < 20 else "B", "h": 2 if i < 16 else 1})
    for i in range(10):
        t.observe("notC", {"f": "A" if i < 5 else "B", "h": 2 if i < 9 else 1})
    hand = t.posterior_literal("C", {"f": "A", "h": 2})
    hand_ok = abs(hand - 0.64) <= 1e-15

    rng = np.random.default_rng(202)
    worst, n = 0.0, 0
    while n < 1000:
        table, classes, domains, _, _ = random_table(rng, alpha=1.0, max_features=1)
        feature = next(iter(domains))
        value = domains[feature][int(rng.integers(len(domains[feature])))]
        for c in classes:
            worst = max(worst, abs(table.posterior_literal(c, {feature: value})
                                   - table.posterior(c, {feature: value})))
        n += 1
    ok = hand_ok and worst <= 1e-12
    report(2, "literal Bayes-rule posterior", ok,
           f"hand example {hand!r}, single-feature max |d|={worst:.2e} over {n} tables")
    assert ok


# -- 3 --------------------------------------------------------------------


def test_criterion_3_optimizer_oracle():
    rng = np.random.default_rng(303)
    instances = [random_instance(rng) for _ in range(100)]
    elapsed, agree, feasible = 0.0, 0, 0
    for inst in instances:
        t0 = time.perf_counter()
        dec = decide_bid(inst.netq, inst.aucm, inst.req, inst.view, inst.params, BACKBONE)
        elapsed += time.perf_counter() - t0
        expected = brute_force_bid(inst.netq, inst.aucm, inst.req, inst.nodes, inst.edges,
                                   OBSERVER, inst.params)
        if expected is None:
            agree += not isinstance(dec, Bid)
        else:
            feasible += 1
            agree += isinstance(dec, Bid) and \
                (dec.next_hop, dec.undercut, dec.margin, dec.price) == expected
    ok = agree == len(instances) and elapsed < 5
    report(3, "exhaustive bid equals brute-force argmax", ok,
           f"{agree}/{len(instances)} identical, {feasible} with a feasible bid, "
           f"decide time {elapsed:.3f}s")
    assert ok


# -- 4 --------------------------------------------------------------------


def test_criterion_4_fallback_rule():
    rng = np.random.default_rng(404)
    hits = 0
    for _ in range(100):
        inst = random_instance(rng, alpha=1.0, theta1=1.0, force_backbone=True)
        assert inst.view.reachable(BACKBONE)
        dec = decide_bid(inst.netq, inst.aucm, inst.req, inst.view, inst.params, BACKBONE)
        hits += dec == BackboneFallback(price=inst.req.budget)
    ok = hits == 100
    report(4, "strict auction threshold forces backbone fallback at full budget", ok,
           f"{hits}/100")
    assert ok


# -- 5 --------------------------------------------------------------------


def test_criterion_5_ledger_conservation():
    cfg = mixed_config(n=20, ticks=10_000, rate=0.5)
    sim = Simulation(cfg)
    settlements, violations = 0, 0
    balances, injected, fines = {}, 0, 0
    t0 = time.perf_counter()
    for _ in range(cfg.ticks):
        for e in sim.advance():
            if e.kind != "settled":
                continue
            settlements += 1
            p = e.payload
            # independent replay of the transfers
            for payer, payee, amount in p["transfers"]:
                if payer == "backbone":
                    injected += amount
                else:
                    balances[payer] = balances.get(payer, 0) - amount
                if payee == "backbone":
                    injected -= amount
                elif payee == "fines":
                    fines += amount
                else:
                    balances[payee] = balances.get(payee, 0) + amount
            replay_gap = sum(balances.values()) - injected + fines
            live_gap = sim.ledger.identity_gap()
            reported_gap = p["balance_sum"] - p["injected"] + p["fines"]
            violations += (replay_gap, live_gap, reported_gap) != (0, 0, 0)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and settlements > 0 and elapsed < 60
    report(5, "ledger identity after every settlement", ok,
           f"{settlements} settlements, {violations} violations, {elapsed:.1f}s for 10k ticks")
    assert ok


# -- 6 --------------------------------------------------------------------


def test_criterion_6_determinism(tmp_path):
    cfg = mixed_config(n=20, ticks=1500, rate=0.5, seed=17)
    simulate(cfg, tmp_path / "a")
    simulate(cfg, tmp_path / "b")
    a = (tmp_path / "a" / "trace.jsonl").read_bytes()
    b = (tmp_path / "b" / "trace.jsonl").read_bytes()
    ok = a == b and len(a) > 0
    report(6, "identical config and seed give byte-identical traces", ok,
           f"{len(a)} bytes, {len(a.splitlines())} events")
    assert ok


# -- 7 --------------------------------------------------------------------


def test_criterion_7_calibration():
    rng = np.random.default_rng(707)
    nodes = tuple(range(8))
    scenario = Scenario(nodes, tuple(random_graph(rng, 8, 4)), backbone=0)
    params = ChurnParams(p_down=0.1, p_up=0.3)
    observer = 1
    model = NetQualityModel(observer, nodes, alpha=1)
    hits = dict.fromkeys(model.destinations, 0)
    snap = scenario.initial_snapshot()
    churn_rng = np.random.default_rng(7)
    n = 50_000
    for _ in range(n):
        snap, churn_rng = step_churn(snap, scenario.potential_edges, params, churn_rng)
        view = derive_view(snap, observer)
        model.ingest_view(view)
        for d in hits:
            hits[d] += view.reachable(d)
    gaps = {d: abs(model.reachability_prior(d) - hits[d] / n) for d in hits}
    worst = max(gaps.values())
    ok = worst <= 0.02
    report(7, "learned reachability prior matches empirical frequency", ok,
           f"{n} snapshots, {len(gaps)} destinations, max gap {worst:.2e}")
    assert ok


# -- 8 --------------------------------------------------------------------


def test_criterion_8_churn_stationarity():
    rng = np.random.default_rng(808)
    nodes = tuple(range(10))
    edges = tuple(random_graph(rng, 10, 5))
    params = ChurnParams(p_down=0.1, p_up=0.3)
    snap = Scenario(nodes, edges, backbone=0).initial_snapshot()
    churn_rng = np.random.default_rng(8)
    ticks, up = 100_000, 0
    for _ in range(ticks):
        snap, churn_rng = step_churn(snap, edges, params, churn_rng)
        up += len(snap.edges)
    frac = up / (ticks * len(edges))
    target = params.p_up / (params.p_up + params.p_down)
    ok = abs(frac - target) <= 0.02
    report(8, "long-run up-edge fraction", ok,
           f"{frac:.4f} vs {target:.4f} over {ticks} ticks and {len(edges)} edges")
    assert ok


# -- 9 --------------------------------------------------------------------


def _strategy_table(reports):
    rows = {}
    for kind in ("bmaniac", "random", "fixed_margin", "always_backbone"):
        per_seed = [r.by_strategy()[kind] for r in reports]
        ratios = [s["delivery_ratio"] for s in per_seed if s["delivery_ratio"] is not None]
        gaps = [s["calibration_gap"] for s in per_seed if s["calibration_gap"] is not None]
        rows[kind] = (
            statistics.fmean(s["mean_profit"] for s in per_seed),
            statistics.fmean(ratios) if ratios else float("nan"),
            statistics.fmean(gaps) if gaps else float("nan"),
        )
    return rows


def test_criterion_9_comparative_report(tmp_path):
    t0 = time.perf_counter()
    base = mixed_config(n=12, ticks=1500, rate=0.5, seed=1)
    reports = run_sweep(base, tmp_path / "sweep", 10, first_seed=1)
    table = _strategy_table(reports)

    # learning-phase effect: the same network for a short and a long session
    short = run_sweep(base.replace(ticks=150), tmp_path / "short", 10, first_seed=1)
    long_ = run_sweep(base.replace(ticks=3000), tmp_path / "long", 10, first_seed=1)
    s_tab, l_tab = _strategy_table(short), _strategy_table(long_)
    elapsed = time.perf_counter() - t0

    lines = ["strategy          mean_profit  delivery_ratio  calibration_gap"]
    for kind, (profit, ratio, gap) in table.items():
        lines.append(f"{kind:<17} {profit:>11.1f}  {ratio:>14.3f}  {gap:>15.3f}")
    lines.append("bmaniac session   ticks  profit/tick  delivery_ratio  calibration_gap")
    for label, tab, ticks in (("short", s_tab, 150), ("long", l_tab, 3000)):
        profit, ratio, gap = tab["bmaniac"]
        lines.append(f"{label:<17} {ticks:>5}  {profit / ticks:>11.3f}  {ratio:>14.3f}  "
                     f"{gap:>15.3f}")
    print("\n".join(lines))
    ACCEPTANCE_LINES.extend("    " + line for line in lines)

    ok = len(reports) == 10 and elapsed < 300
    report(9, "10-seed comparative report", ok, f"{elapsed:.1f}s")
    assert ok
