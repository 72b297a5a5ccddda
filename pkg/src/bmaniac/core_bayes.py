"""Incremental categorical Naive Bayes over frequency tables.

A :class:`FrequencyTable` keeps exact integer counts for one class variable
and a fixed list of categorical features.  Probabilities are derived on
demand with additive (Laplace) smoothing of strength ``alpha``.

Two posterior forms are offered:

* :meth:`FrequencyTable.posterior` -- the normalized form
  ``prior(c) * prod(cond) / sum_k prior(k) * prod(cond_k)``.  This is what
  decision code should use; it always lies in [0, 1].
* :meth:`FrequencyTable.posterior_literal` -- the unnormalized Bayes-rule
  form that divides by the product of the feature marginals.  Because the
  marginals are independent estimates the ratio can exceed 1, so the result
  is clamped.  Kept for cross-checking only.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ABSENT",
    "DomainError",
    "IncompleteObservationError",
    "IndeterminatePosteriorError",
    "FrequencyTable",
]


class _Absent:
    """Feature value recorded when a feature is undefined for an observation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"

    def __reduce__(self):
        return (_Absent, ())


ABSENT = _Absent()


class DomainError(ValueError):
    """A class or feature value outside its declared domain."""


class IncompleteObservationError(ValueError):
    """An observation that does not assign every feature."""


class IndeterminatePosteriorError(ArithmeticError):
    """Posterior undefined: every class score (or a marginal) is zero."""


def _encode(value: Any) -> str:
    return "null" if value is ABSENT else json.dumps(value)


def _decode(token: str) -> Any:
    value = json.loads(token)
    if value is None:
        return ABSENT
    if isinstance(value, list):
        return tuple(value)
    return value


class FrequencyTable:
    """Counts for one class variable and its categorical features.

    Parameters
    ----------
    class_values : sequence
        Ordered class labels.
    feature_specs : sequence of (name, domain)
        Ordered features; ``ABSENT`` is appended to every domain that lacks it.
    alpha : float
        Additive smoothing strength (>= 0).
    window : int or None
        If set, only the ``window`` most recent observations are counted.
    """

    def __init__(
        self,
        class_values: Sequence[Hashable],
        feature_specs: Sequence[tuple[str, Iterable[Hashable]]],
        alpha: float = 1.0,
        window: int | None = None,
    ):
        if not class_values:
            raise ValueError("at least one class value is required")
        if len(set(class_values)) != len(class_values):
            raise ValueError("duplicate class values")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        if window is not None and (int(window) != window or window < 1):
            raise ValueError("window must be a whole number >= 1 or None")

        self.class_values = tuple(class_values)
        self.alpha = float(alpha)
        self.window = None if window is None else int(window)
        self._class_index = {c: i for i, c in enumerate(self.class_values)}

        self.feature_names: tuple[str, ...] = ()
        self.domains: dict[str, tuple] = {}
        self._value_index: dict[str, dict] = {}
        names = []
        for name, domain in feature_specs:
            if name in self.domains:
                raise ValueError(f"duplicate feature {name!r}")
            values = list(dict.fromkeys(domain))
            if ABSENT not in values:
                values.append(ABSENT)
            names.append(name)
            self.domains[name] = tuple(values)
            self._value_index[name] = {v: i for i, v in enumerate(values)}
        self.feature_names = tuple(names)

        k = len(self.class_values)
        self._class_counts = np.zeros(k, dtype=np.int64)
        self._counts = {
            name: np.zeros((k, len(self.domains[name])), dtype=np.int64)
            for name in self.feature_names
        }
        self._history: deque | None = deque() if self.window is not None else None

    # -- counting -----------------------------------------------------------

    def _class_idx(self, class_value) -> int:
        try:
            return self._class_index[class_value]
        except (KeyError, TypeError):
            raise DomainError(f"unknown class value {class_value!r}") from None

    def _value_idx(self, feature: str, value) -> int:
        try:
            index = self._value_index[feature]
        except KeyError:
            raise DomainError(f"unknown feature {feature!r}") from None
        try:
            return index[value]
        except (KeyError, TypeError):
            raise DomainError(
                f"value {value!r} not in domain of feature {feature!r}"
            ) from None

    def observe(self, class_value, evidence: Mapping[str, Any]) -> "FrequencyTable":
        """Add one fully specified observation; returns ``self``."""
        ci = self._class_idx(class_value)
        extra = set(evidence) - set(self.feature_names)
        if extra:
            raise DomainError(f"unknown feature(s) {sorted(extra)!r}")
        missing = [f for f in self.feature_names if f not in evidence]
        if missing:
            raise IncompleteObservationError(f"missing feature(s) {missing!r}")
        vis = tuple(self._value_idx(f, evidence[f]) for f in self.feature_names)

        if self._history is not None:
            if len(self._history) == self.window:
                old_ci, old_vis = self._history.popleft()
                self._apply(old_ci, old_vis, -1)
            self._history.append((ci, vis))
        self._apply(ci, vis, 1)
        return self

    def _apply(self, ci: int, vis: tuple[int, ...], delta: int) -> None:
        self._class_counts[ci] += delta
        for name, vi in zip(self.feature_names, vis):
            self._counts[name][ci, vi] += delta

    @property
    def total(self) -> int:
        """Number of retained observations."""
        return int(self._class_counts.sum())

    def class_count(self, class_value) -> int:
        return int(self._class_counts[self._class_idx(class_value)])

    def count(self, class_value, feature: str, value) -> int:
        ci = self._class_idx(class_value)
        return int(self._counts[feature][ci, self._value_idx(feature, value)])

    # -- probabilities ------------------------------------------------------

    def prior(self, class_value) -> float:
        ci = self._class_idx(class_value)
        k = len(self.class_values)
        denom = self.total + self.alpha * k
        if denom == 0:
            return 1.0 / k
        return float((self._class_counts[ci] + self.alpha) / denom)

    def conditional(self, feature: str, value, class_value) -> float:
        ci = self._class_idx(class_value)
        vi = self._value_idx(feature, value)
        v = len(self.domains[feature])
        denom = self._class_counts[ci] + self.alpha * v
        if denom == 0:
            # no data for this class and no smoothing: uniform
            return 1.0 / v
        return float((self._counts[feature][ci, vi] + self.alpha) / denom)

    def conditional_array(self, feature: str, class_value) -> np.ndarray:
        """``conditional(feature, v, class_value)`` for every ``v`` in domain order."""
        ci = self._class_idx(class_value)
        if feature not in self._counts:
            raise DomainError(f"unknown feature {feature!r}")
        v = len(self.domains[feature])
        denom = self._class_counts[ci] + self.alpha * v
        if denom == 0:
            return np.full(v, 1.0 / v)
        return (self._counts[feature][ci] + self.alpha) / denom

    def marginal(self, feature: str, value) -> float:
        return sum(
            self.conditional(feature, value, c) * self.prior(c)
            for c in self.class_values
        )

    def _scores(self, evidence: Mapping[str, Any]) -> list[float]:
        for f in evidence:
            if f not in self._value_index:
                raise DomainError(f"unknown feature {f!r}")
        assigned = [f for f in self.feature_names if f in evidence]
        scores = []
        for c in self.class_values:
            s = self.prior(c)
            for f in assigned:
                s = s * self.conditional(f, evidence[f], c)
            scores.append(float(s))
        return scores

    def posterior(self, class_value, evidence: Mapping[str, Any] | None = None) -> float:
        """Normalized Naive Bayes posterior of ``class_value`` given ``evidence``.

        Features missing from ``evidence`` are marginalized out, which for a
        Naive Bayes factorization means they are simply left out of the product.
        """
        ci = self._class_idx(class_value)
        scores = self._scores(evidence or {})
        z = sum(scores)
        if z == 0:
            raise IndeterminatePosteriorError(
                "all class scores are zero for this evidence (alpha=0, unseen values)"
            )
        return scores[ci] / z

    def posterior_literal(
        self, class_value, evidence: Mapping[str, Any] | None = None
    ) -> float:
        """``prior * prod(conditional) / prod(marginal)``, clamped to [0, 1]."""
        evidence = evidence or {}
        self._class_idx(class_value)
        for f in evidence:
            if f not in self._value_index:
                raise DomainError(f"unknown feature {f!r}")
        num = self.prior(class_value)
        den = 1.0
        for f in self.feature_names:
            if f in evidence:
                num = num * self.conditional(f, evidence[f], class_value)
                den = den * self.marginal(f, evidence[f])
        if den == 0:
            raise IndeterminatePosteriorError("zero marginal in denominator")
        return min(1.0, max(0.0, float(num / den)))

    # -- copying and persistence --------------------------------------------

    def empty_like(self) -> "FrequencyTable":
        return FrequencyTable(
            self.class_values,
            [(f, self.domains[f]) for f in self.feature_names],
            alpha=self.alpha,
            window=self.window,
        )

    def copy(self) -> "FrequencyTable":
        other = self.empty_like()
        other._class_counts = self._class_counts.copy()
        other._counts = {f: a.copy() for f, a in self._counts.items()}
        if self._history is not None:
            other._history = deque(self._history)
        return other

    def same_counts(self, other: "FrequencyTable") -> bool:
        return (
            self.class_values == other.class_values
            and self.domains == other.domains
            and np.array_equal(self._class_counts, other._class_counts)
            and all(np.array_equal(self._counts[f], other._counts[f]) for f in self._counts)
        )

    def to_text(self) -> str:
        """Line-oriented dump.

        Header lines start with ``#``.  Body lines are tab separated
        ``class  feature  value  count`` with JSON-encoded tokens; class
        totals use feature ``*``.  Windowed tables also emit their retained
        observations (``@`` lines, oldest first) so eviction order survives.
        """
        lines = [
            "# classes\t" + "\t".join(_encode(c) for c in self.class_values),
            f"# alpha\t{self.alpha!r}",
            f"# window\t{'null' if self.window is None else self.window}",
        ]
        for f in self.feature_names:
            lines.append(
                f"# feature\t{json.dumps(f)}\t"
                + "\t".join(_encode(v) for v in self.domains[f])
            )
        for ci, c in enumerate(self.class_values):
            lines.append(f"{_encode(c)}\t\"*\"\t\"*\"\t{int(self._class_counts[ci])}")
            for f in self.feature_names:
                for vi, v in enumerate(self.domains[f]):
                    lines.append(
                        f"{_encode(c)}\t{json.dumps(f)}\t{_encode(v)}\t"
                        f"{int(self._counts[f][ci, vi])}"
                    )
        if self._history is not None:
            for ci, vis in self._history:
                lines.append("@\t" + "\t".join(str(i) for i in (ci, *vis)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FrequencyTable":
        classes, alpha, window, specs = None, 1.0, None, []
        body, history = [], []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            parts = raw.split("\t")
            if parts[0] == "# classes":
                classes = [_decode(p) for p in parts[1:]]
            elif parts[0] == "# alpha":
                alpha = float(parts[1])
            elif parts[0] == "# window":
                window = json.loads(parts[1])
            elif parts[0] == "# feature":
                specs.append((json.loads(parts[1]), [_decode(p) for p in parts[2:]]))
            elif parts[0] == "@":
                history.append(tuple(int(p) for p in parts[1:]))
            else:
                body.append(parts)
        if classes is None:
            raise ValueError("missing '# classes' header")
        table = cls(classes, specs, alpha=alpha, window=window)
        for c, f, v, n in body:
            ci = table._class_idx(_decode(c))
            f = json.loads(f)
            if f == "*":
                table._class_counts[ci] = int(n)
            else:
                table._counts[f][ci, table._value_idx(f, _decode(v))] = int(n)
        if table._history is not None:
            table._history.extend((h[0], h[1:]) for h in history)
        return table

    def __repr__(self):
        return (
            f"FrequencyTable(classes={self.class_values!r}, "
            f"features={self.feature_names!r}, n={self.total}, alpha={self.alpha})"
        )
