"""Per-destination path-stability model learned from routing views.

For every destination ``n`` the observer keeps a Naive Bayes table whose
class is "can I reach n?" and whose features are the selected next hop
``f`` and the hop count ``h`` recorded in each view.  Querying with a
candidate relay and its hop count gives the probability that forwarding
through that relay reaches ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core_bayes import ABSENT, DomainError, FrequencyTable
from .topology import UNREACHABLE, RoutingView

REACHABLE = "reachable"
UNREACHABLE_CLASS = "unreachable"
CLASSES = (REACHABLE, UNREACHABLE_CLASS)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PathEvidence:
    next_hop: object
    hops: object

    def as_evidence(self) -> dict:
        hops = ABSENT if self.hops is UNREACHABLE else self.hops
        return {"f": self.next_hop, "h": hops}


class NetQualityModel:
    def __init__(self, observer: int, nodes, alpha: float = 1.0, window: int | None = None):
        nodes = tuple(sorted(nodes))
        if observer not in nodes:
            raise ConfigurationError(f"observer {observer} not among nodes")
        self.observer = observer
        self.nodes = nodes
        self.alpha = alpha
        self.window = window
        others = [n for n in nodes if n != observer]
        specs = [("f", others), ("h", range(1, len(nodes) + 1))]
        self.tables = {
            n: FrequencyTable(CLASSES, specs, alpha=alpha, window=window) for n in others
        }
        self.views_ingested = 0

    @property
    def destinations(self) -> tuple[int, ...]:
        return tuple(self.tables)

    def table(self, n: int) -> FrequencyTable:
        try:
            return self.tables[n]
        except KeyError:
            raise DomainError(f"unknown destination {n!r}") from None

    def ingest_view(self, view: RoutingView) -> "NetQualityModel":
        if view.observer != self.observer:
            raise ConfigurationError(
                f"view observer {view.observer} does not match model observer {self.observer}"
            )
        hops = view.hops
        next_hops = view.next_hops
        for n, table in self.tables.items():
            if n in hops:
                table.observe(REACHABLE, {"f": next_hops[n], "h": hops[n]})
            else:
                table.observe(UNREACHABLE_CLASS, {"f": ABSENT, "h": ABSENT})
        self.views_ingested += 1
        return self

    def path_success_probability(self, n: int, evidence: PathEvidence) -> float:
        return self.table(n).posterior(REACHABLE, evidence.as_evidence())

    def reachability_prior(self, n: int) -> float:
        return self.table(n).prior(REACHABLE)

    def rank_candidates(self, d: int, view: RoutingView) -> list[tuple[int, float]]:
        """Current neighbors scored as relays toward ``d``, best first (ties: lower id)."""
        ranked = []
        for f in sorted(view.neighbors):
            h = view.relay_hops(f, d)
            ranked.append((f, self.path_success_probability(d, PathEvidence(f, h))))
        ranked.sort(key=lambda item: (-item[1], item[0]))
        return ranked

    def to_text(self) -> str:
        chunks = []
        for n, table in self.tables.items():
            chunks.append(f"## net_quality observer={self.observer} destination={n}\n")
            chunks.append(table.to_text())
        return "".join(chunks)
