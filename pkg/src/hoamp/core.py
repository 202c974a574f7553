"""Core domain types shared by all engines.

Processes are identified by 1-based integers.  A round's message deliveries
are a communication graph (who hears from whom); an infinite schedule is
represented finitely as a lasso: a prefix of graphs followed by a repeating
cycle.  Undecided outputs are represented by ``None``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

BOT = None  # undecided / "no value"


class HoampError(Exception):
    """Base class for toolkit errors."""


class GraphStructureError(HoampError):
    """Graph is malformed (bad vertex set), as opposed to merely invalid."""


class ScheduleError(HoampError):
    """Schedule violates a structural condition (Integrity, No Duplicates...)."""


class ProtocolViolation(HoampError):
    """A protocol broke its contract, e.g. decided twice."""


class CapacityError(HoampError):
    """An enumeration would exceed the configured cap."""


class DomainError(HoampError):
    """An argument is outside the operation's domain."""


def canonical_json(obj) -> str:
    """Byte-stable JSON used for file formats and run fingerprints."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Communication graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommunicationGraph:
    """One round's directed delivery relation.

    ``in_neighbors[i - 1]`` is the set of processes that process ``i`` hears
    from this round.  Equality is by in-neighbor sets.
    """

    n: int
    in_neighbors: tuple[frozenset[int], ...]

    @classmethod
    def from_lists(cls, lists: Sequence[Iterable[int]]) -> "CommunicationGraph":
        return cls(len(lists), tuple(frozenset(s) for s in lists))

    @classmethod
    def complete(cls, n: int) -> "CommunicationGraph":
        full = frozenset(range(1, n + 1))
        return cls(n, tuple(full for _ in range(n)))

    def in_set(self, p: int) -> frozenset[int]:
        return self.in_neighbors[p - 1]

    def receivers_of(self, p: int) -> frozenset[int]:
        """Processes that hear from ``p`` under this graph (includes ``p``
        when the self-loop is present)."""
        return frozenset(q for q in range(1, self.n + 1) if p in self.in_neighbors[q - 1])

    def to_lists(self) -> list[list[int]]:
        return [sorted(s) for s in self.in_neighbors]

    def __repr__(self) -> str:
        return f"CommunicationGraph({self.to_lists()})"


def validate_communication_graph(g: CommunicationGraph, n: int, f: int) -> bool:
    """True iff ``g`` has all self-loops and every in-neighbor set has size
    at least ``n - f``.

    A malformed graph (wrong vertex count, out-of-range vertex) raises
    ``GraphStructureError`` instead of returning False.
    """
    if g.n != n or len(g.in_neighbors) != n:
        raise GraphStructureError(f"graph has {g.n} vertices, expected {n}")
    for i, s in enumerate(g.in_neighbors, start=1):
        for v in s:
            if not 1 <= v <= n:
                raise GraphStructureError(f"vertex {v} out of range [1, {n}] at process {i}")
    for i, s in enumerate(g.in_neighbors, start=1):
        if i not in s:
            return False
        if len(s) < n - f:
            return False
    return True


# ---------------------------------------------------------------------------
# Lasso schedules (prefix + repeating cycle of graphs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LassoSchedule:
    """Finite stand-in for an infinite graph schedule.

    Round ``r`` (1-based) resolves to ``prefix[r - 1]`` when ``r <=
    len(prefix)``, otherwise to ``cycle[(r - len(prefix) - 1) % len(cycle)]``:
    the cycle is unrolled in order after the prefix.
    """

    n: int
    f: int
    prefix: tuple[CommunicationGraph, ...]
    cycle: tuple[CommunicationGraph, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ScheduleError("lasso cycle must be nonempty")

    def resolve_round(self, r: int) -> CommunicationGraph:
        if r < 1:
            raise DomainError(f"round index must be >= 1, got {r}")
        if r <= len(self.prefix):
            return self.prefix[r - 1]
        return self.cycle[(r - len(self.prefix) - 1) % len(self.cycle)]

    def validate(self) -> bool:
        return all(
            validate_communication_graph(g, self.n, self.f)
            for g in self.prefix + self.cycle
        )

    @property
    def phase_range(self) -> int:
        """Number of rounds after which the suffix structure repeats."""
        return len(self.prefix) + len(self.cycle)

    def normalized(self) -> "LassoSchedule":
        """Canonical eventually-periodic form: primitive cycle, shortest prefix.

        Two lassos denote the same infinite sequence iff their normalized
        forms are equal.
        """
        cycle = list(self.cycle)
        # primitive period (the minimal period of a periodic word divides
        # any other period, so divisors suffice)
        for d in range(1, len(cycle) + 1):
            if len(cycle) % d == 0 and cycle == cycle[:d] * (len(cycle) // d):
                cycle = cycle[:d]
                break
        prefix = list(self.prefix)
        while prefix and prefix[-1] == cycle[-1]:
            cycle = [cycle[-1]] + cycle[:-1]
            prefix.pop()
        return LassoSchedule(self.n, self.f, tuple(prefix), tuple(cycle))

    # -- file format: JSON with graphs as sorted in-neighbor lists ---------

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "prefix": [g.to_lists() for g in self.prefix],
            "cycle": [g.to_lists() for g in self.cycle],
        }

    def dumps(self) -> str:
        return canonical_json(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "LassoSchedule":
        try:
            return cls(
                int(d["n"]),
                int(d["f"]),
                tuple(CommunicationGraph.from_lists(g) for g in d["prefix"]),
                tuple(CommunicationGraph.from_lists(g) for g in d["cycle"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ScheduleError(f"malformed schedule document: {e}") from e

    @classmethod
    def loads(cls, text: str) -> "LassoSchedule":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScheduleError(f"schedule file is not valid JSON: {e}") from e
        return cls.from_json_dict(d)


def complete_lasso(n: int, f: int) -> LassoSchedule:
    """All-deliver schedule: a single complete graph repeated forever."""
    return LassoSchedule(n, f, (), (CommunicationGraph.complete(n),))


# ---------------------------------------------------------------------------
# AMP lasso schedules (sequences of scheduler steps)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmpStep:
    """One scheduler action: ``process`` takes a step and is handed the
    oldest pending message from each sender in ``deliver_from`` (in order);
    an empty list means it receives nothing.

    Message references are by sender, FIFO per (sender, recipient) channel,
    which makes references unambiguous because every step broadcasts exactly
    one message.
    """

    process: int
    deliver_from: tuple[int, ...] = ()

    def to_json(self) -> list:
        return [self.process, list(self.deliver_from)]

    @classmethod
    def from_json(cls, item) -> "AmpStep":
        p, senders = item
        return cls(int(p), tuple(int(s) for s in senders))


@dataclass(frozen=True)
class AmpLassoSchedule:
    """Finite stand-in for an infinite AMP schedule.

    Processes that take steps in the cycle take infinitely many steps and are
    non-faulty; the rest act only in the prefix and are the faulty candidates.
    """

    n: int
    f: int
    prefix: tuple[AmpStep, ...]
    cycle: tuple[AmpStep, ...]

    @property
    def faulty_hint(self) -> frozenset[int]:
        stepping = {a.process for a in self.cycle}
        return frozenset(p for p in range(1, self.n + 1) if p not in stepping)

    def action_at(self, k: int) -> AmpStep:
        """The k-th action, 0-based, with the cycle unrolled."""
        if k < len(self.prefix):
            return self.prefix[k]
        if not self.cycle:
            raise ScheduleError("schedule exhausted: empty cycle")
        return self.cycle[(k - len(self.prefix)) % len(self.cycle)]

    def validate_structure(self) -> None:
        """Checks process ranges, the faulty bound, and load-time Integrity:
        no action ever references an unsent or already-delivered message.

        Raises ``ScheduleError`` on violation.  Integrity holds for all
        unrollings iff it holds over prefix + 2 cycles and no per-channel
        backlog shrinks across a cycle (net change >= 0).
        """
        for a in self.prefix + self.cycle:
            if not 1 <= a.process <= self.n:
                raise ScheduleError(f"process {a.process} out of range")
            for s in a.deliver_from:
                if not 1 <= s <= self.n:
                    raise ScheduleError(f"sender {s} out of range")
        if len(self.faulty_hint) > self.f:
            raise ScheduleError(
                f"{len(self.faulty_hint)} processes absent from cycle exceeds f={self.f}"
            )
        pending: dict[tuple[int, int], int] = {}
        def run_window(actions):
            for idx, a in enumerate(actions):
                for s in a.deliver_from:
                    key = (s, a.process)
                    if pending.get(key, 0) <= 0:
                        raise ScheduleError(
                            f"action {idx}: delivery at p{a.process} from p{s} "
                            "references an unsent or already-delivered message"
                        )
                    pending[key] -= 1
                for q in range(1, self.n + 1):
                    pending[(a.process, q)] = pending.get((a.process, q), 0) + 1

        run_window(self.prefix)
        before = dict(pending)
        run_window(self.cycle)
        run_window(self.cycle)
        after = dict(pending)
        if self.cycle:
            for key in set(before) | set(after):
                net = (after.get(key, 0) - before.get(key, 0)) / 2
                if net < 0:
                    raise ScheduleError(
                        f"channel {key} drains {-net} messages per cycle; "
                        "some unrolling would deliver an unsent message"
                    )

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "prefix": [a.to_json() for a in self.prefix],
            "cycle": [a.to_json() for a in self.cycle],
        }

    def dumps(self) -> str:
        return canonical_json(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "AmpLassoSchedule":
        try:
            return cls(
                int(d["n"]),
                int(d["f"]),
                tuple(AmpStep.from_json(a) for a in d["prefix"]),
                tuple(AmpStep.from_json(a) for a in d["cycle"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ScheduleError(f"malformed AMP schedule document: {e}") from e

    @classmethod
    def loads(cls, text: str) -> "AmpLassoSchedule":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScheduleError(f"AMP schedule file is not valid JSON: {e}") from e
        return cls.from_json_dict(d)


# ---------------------------------------------------------------------------
# Longest-common-prefix metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LcpDistance:
    """Result of a common-prefix distance computation.

    When ``exact`` is False the true distance lies in ``(0, value]``: the
    scan horizon was exhausted before the (provably existing) first
    difference was located.
    """

    value: Fraction
    exact: bool
    diff_index: Optional[int] = None

    def __float__(self) -> float:
        return float(self.value)


def _item_at(seq, k: int):
    if isinstance(seq, LassoSchedule):
        return seq.resolve_round(k + 1)
    return seq[k]


def lcp_distance(a, b, horizon: int = 64) -> LcpDistance:
    """Distance ``2^-K`` where ``K`` is the first index at which the unrolled
    sequences differ; 0 when they are identical.

    Accepts two lassos (compared graph by graph) or two plain sequences of
    length >= ``horizon``.  For lassos, identity is decided exactly via
    normalization; for plain sequences, equality through the horizon counts
    as identity only if the horizon covers both sequences entirely.
    """
    if isinstance(a, LassoSchedule) and isinstance(b, LassoSchedule):
        if a.normalized() == b.normalized():
            return LcpDistance(Fraction(0), True)
        # distinct eventually-periodic sequences must differ by this index
        bound = max(len(a.prefix), len(b.prefix)) + math.lcm(len(a.cycle), len(b.cycle))
        for k in range(min(horizon, bound)):
            if _item_at(a, k) != _item_at(b, k):
                return LcpDistance(Fraction(1, 2 ** k), True, diff_index=k)
        # first difference exists but lies beyond the horizon
        return LcpDistance(Fraction(1, 2 ** horizon), False)

    la, lb = len(a), len(b)
    for k in range(min(horizon, la, lb)):
        if a[k] != b[k]:
            return LcpDistance(Fraction(1, 2 ** k), True, diff_index=k)
    if la == lb and la <= horizon:
        return LcpDistance(Fraction(0), True)
    if min(la, lb) < horizon and la != lb:
        k = min(la, lb)
        return LcpDistance(Fraction(1, 2 ** k), True, diff_index=k)
    return LcpDistance(Fraction(1, 2 ** horizon), False)
