"""Naive Bayes model of whether a submitted bid ends in a gain.

Features are the announced timeout (binned), the two bid fractions
``undercut`` (share of the budget given up) and ``margin`` (share of the
budget kept) and the packet destination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_bayes import DomainError, FrequencyTable

GAIN = "gain"
NO_GAIN = "no-gain"
CLASSES = (GAIN, NO_GAIN)
FEATURES = ("t", "undercut", "margin", "d")


def make_grid(step: float = 0.05) -> tuple[float, ...]:
    """Evenly spaced fractions from 0 to 1 inclusive."""
    if not 0 < step <= 1:
        raise ValueError("grid step must be in (0, 1]")
    n = round(1 / step)
    if abs(n * step - 1) > 1e-9:
        raise ValueError(f"grid step {step} does not divide 1")
    return tuple(round(i / n, 10) for i in range(n + 1))


BINARY_GRID = (0.0, 1.0)


def snap_to_grid(value: float, grid) -> float:
    """Return the grid value equal to ``value`` (within 1e-9) or raise."""
    for g in grid:
        if abs(g - value) <= 1e-9:
            return g
    raise DomainError(f"{value!r} is not on the grid")


def time_bin(t: int, t_max: int, bins: int) -> int:
    """1-based uniform bin of ``t`` over ``[1, t_max]``."""
    if not 1 <= t <= t_max:
        raise DomainError(f"timeout {t} outside [1, {t_max}]")
    return min(bins, (t - 1) * bins // t_max + 1)


@dataclass(frozen=True)
class AuctionOutcomeRecord:
    timeout: int
    undercut: float
    margin: float
    destination: int
    success: bool

    def to_dict(self) -> dict:
        return {
            "t": self.timeout,
            "undercut": self.undercut,
            "margin": self.margin,
            "d": self.destination,
            "s": GAIN if self.success else NO_GAIN,
        }


class AuctionSuccessModel:
    def __init__(
        self,
        nodes,
        t_max: int,
        time_bins: int = 8,
        grid=None,
        alpha: float = 1.0,
        window: int | None = None,
    ):
        if t_max < 1 or time_bins < 1:
            raise ValueError("t_max and time_bins must be >= 1")
        self.grid = tuple(make_grid() if grid is None else grid)
        if list(self.grid) != sorted(self.grid) or not all(0 <= g <= 1 for g in self.grid):
            raise ValueError("grid must be sorted within [0, 1]")
        self.nodes = tuple(sorted(nodes))
        self.t_max = int(t_max)
        self.time_bins = int(time_bins)
        self.table = FrequencyTable(
            CLASSES,
            [
                ("t", range(1, self.time_bins + 1)),
                ("undercut", self.grid),
                ("margin", self.grid),
                ("d", self.nodes),
            ],
            alpha=alpha,
            window=window,
        )

    def _evidence(self, t, undercut, margin, d) -> dict:
        if d not in self.nodes:
            raise DomainError(f"unknown destination {d!r}")
        return {
            "t": time_bin(t, self.t_max, self.time_bins),
            "undercut": snap_to_grid(undercut, self.grid),
            "margin": snap_to_grid(margin, self.grid),
            "d": d,
        }

    def record_outcome(self, record: AuctionOutcomeRecord) -> "AuctionSuccessModel":
        ev = self._evidence(record.timeout, record.undercut, record.margin, record.destination)
        self.table.observe(GAIN if record.success else NO_GAIN, ev)
        return self

    def success_probability(self, t: int, undercut: float, margin: float, d: int) -> float:
        return self.table.posterior(GAIN, self._evidence(t, undercut, margin, d))

    def success_grid(self, t: int, d: int) -> np.ndarray:
        """``success_probability(t, grid[i], grid[j], d)`` as a matrix ``[i, j]``.

        Multiplications run in the same order as the scalar posterior so the
        two agree bit for bit.
        """
        ev = self._evidence(t, self.grid[0], self.grid[0], d)
        table = self.table
        n = len(self.grid)
        scores = []
        for c in CLASSES:
            ct = table.conditional("t", ev["t"], c)
            cu = table.conditional_array("undercut", c)[:n]
            cm = table.conditional_array("margin", c)[:n]
            cd = table.conditional("d", d, c)
            s = table.prior(c) * ct * cu[:, None] * cm[None, :] * cd
            scores.append(s)
        z = scores[0] + scores[1]
        with np.errstate(invalid="ignore", divide="ignore"):
            return scores[0] / z
