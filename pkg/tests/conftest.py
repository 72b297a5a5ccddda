import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bmaniac.config import config_from_dict  # noqa: E402


def random_graph(rng, n, extra):
    """Ring over ``n`` nodes plus ``extra`` random chords."""
    edges = {(i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i) for i in range(n)}
    while len(edges) < n + extra:
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return sorted(edges)


def mixed_config(n=20, ticks=100, seed=1, rate=0.5, **kw):
    rng = np.random.default_rng(1234)
    kinds = ["bmaniac", "random", "fixed_margin", "always_backbone"]
    data = dict(
        nodes=list(range(n)),
        edges=[list(e) for e in random_graph(rng, n, n)],
        backbone=0,
        ticks=ticks,
        seed=seed,
        packet_rate=rate,
        agents={str(i): {"strategy": kinds[i % 4]} for i in range(1, n)},
    )
    data.update(kw)
    return config_from_dict(data)


@pytest.fixture
def chain_config():
    """Static chain 0(backbone)-1-2-3 with one scheduled packet to node 3."""
    return config_from_dict(dict(
        nodes=[0, 1, 2, 3],
        edges=[[0, 1], [1, 2], [2, 3]],
        backbone=0,
        ticks=5,
        seed=7,
        p_up=0.0,
        p_down=0.0,
        packet_rate=0.0,
        strategy="fixed_margin",
        packets=[{"tick": 1, "destination": 3, "budget": 100, "timeout": 10}],
    ))


# acceptance lines collected by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
