"""Protocol interfaces, run records, and validity reports.

Protocols are deterministic state machines.  ``init`` returns the initial
local state, which doubles as the first broadcast (a full-information process
initially broadcasts its initial state).  ``on_receive`` consumes the round's
(or step's) received messages as a canonically sorted tuple of payloads --
sender identities are not exposed by the engine; protocols that need them
embed identifiers in their payloads.

A protocol decides at most once; engines raise ``ProtocolViolation`` on a
second decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import BOT, ProtocolViolation, canonical_json
from .views import EventLog, View, _jsonable


def sort_received(payloads) -> tuple:
    """Canonical multiset order for received messages."""
    return tuple(sorted(payloads, key=lambda p: canonical_json(_jsonable(p))))


class Protocol:
    """Deterministic protocol: ``init`` then one ``on_receive`` per round/step."""

    decision_fn_id = "unnamed"  # all processes share one decision function

    def init(self, pid: int, input_value):
        raise NotImplementedError

    def on_receive(self, state, received: tuple):
        """Returns ``(new_state, decision_or_None, next_message)``."""
        raise NotImplementedError


class RandomizedProtocol(Protocol):
    """Adds an explicit per-process coin stream to local computation."""

    def on_receive(self, state, received: tuple, coin=None):
        raise NotImplementedError


class FlpProtocol:
    """Point-to-point variant: sends are (destination, message) pairs and a
    step receives a single message or nothing."""

    decision_fn_id = "unnamed"

    def init(self, pid: int, input_value):
        raise NotImplementedError

    def on_receive(self, state, message):
        """Returns ``(new_state, decision_or_None, sends)`` where ``sends``
        is a tuple of ``(destination, message)`` pairs."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Validity reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidityEntry:
    check: str
    ok: bool
    round: Optional[int] = None
    process: Optional[int] = None
    detail: str = ""


@dataclass
class ValidityReport:
    entries: list[ValidityEntry] = field(default_factory=list)

    def add(self, check: str, ok: bool, round: Optional[int] = None,
            process: Optional[int] = None, detail: str = "") -> None:
        self.entries.append(ValidityEntry(check, ok, round, process, detail))

    @property
    def all_pass(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> list[ValidityEntry]:
        return [e for e in self.entries if not e.ok]

    def to_json_dict(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "entries": [
                {"check": e.check, "ok": e.ok, "round": e.round,
                 "process": e.process, "detail": e.detail}
                for e in self.entries
            ],
        }

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return f"all {len(self.entries)} checks pass"
        lines = [f"{len(bad)} of {len(self.entries)} checks fail:"]
        lines += [
            f"  {e.check} (round={e.round}, process={e.process}): {e.detail}"
            for e in bad[:20]
        ]
        if len(bad) > 20:
            lines.append(f"  ... and {len(bad) - 20} more")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass
class RoundRecord:
    """One lockstep round: who sent what, who received what from whom."""

    round: int
    sends: dict[int, object]                       # process -> payload
    received: dict[int, tuple[tuple[int, object], ...]]  # process -> ((sender, payload)...)


@dataclass
class StepRecord:
    """One AMP scheduler step."""

    index: int
    process: int
    received: tuple[tuple[int, object], ...]       # ((sender, payload)...), may be empty
    sent: object


@dataclass
class Run:
    """Alternating configurations and events, flattened to records.

    ``decisions[p] = (value, time)`` with time the deciding round (HO family)
    or step index (AMP).  ``outputs`` substitutes ``None`` for undecided.
    """

    model: str
    n: int
    f: int
    inputs: tuple
    records: list
    decisions: dict[int, tuple]
    faulty: frozenset[int]
    log: Optional[EventLog] = None
    view_heads: dict = field(default_factory=dict)   # (process, round) -> event index
    schedule_fingerprint: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def outputs(self) -> tuple:
        return tuple(
            self.decisions[p][0] if p in self.decisions else BOT
            for p in range(1, self.n + 1)
        )

    def view(self, process: int, round: int) -> View:
        if self.log is None:
            raise ProtocolViolation("run was produced without view tracking")
        return View(self.log, self.view_heads[(process, round)])

    def in_sets_per_round(self) -> list[list[frozenset[int]]]:
        """Effective heard-from sets, derived from the received records."""
        result = []
        for rec in self.records:
            if not isinstance(rec, RoundRecord):
                raise ProtocolViolation("in_sets_per_round applies to round-based runs")
            result.append([
                frozenset(s for s, _ in rec.received.get(p, ()))
                for p in range(1, self.n + 1)
            ])
        return result

    def to_json_dict(self) -> dict:
        records = []
        for rec in self.records:
            if isinstance(rec, RoundRecord):
                records.append({
                    "round": rec.round,
                    "sends": {str(p): _jsonable(m) for p, m in sorted(rec.sends.items())},
                    "received": {
                        str(p): [[s, _jsonable(m)] for s, m in pairs]
                        for p, pairs in sorted(rec.received.items())
                    },
                })
            else:
                records.append({
                    "step": rec.index,
                    "process": rec.process,
                    "received": [[s, _jsonable(m)] for s, m in rec.received],
                    "sent": _jsonable(rec.sent),
                })
        return {
            "model": self.model,
            "n": self.n,
            "f": self.f,
            "inputs": _jsonable(list(self.inputs)),
            "records": records,
            "decisions": {str(p): [_jsonable(v), t] for p, (v, t) in sorted(self.decisions.items())},
            "faulty": sorted(self.faulty),
            "schedule_fingerprint": self.schedule_fingerprint,
        }

    def dumps(self) -> str:
        return canonical_json(self.to_json_dict())


class DecisionTracker:
    """Enforces decide-at-most-once across a run."""

    def __init__(self):
        self.decisions: dict[int, tuple] = {}

    def record(self, process: int, value, time: int) -> None:
        if value is None:
            return
        if process in self.decisions:
            raise ProtocolViolation(
                f"process {process} decided twice (round/step {time})"
            )
        self.decisions[process] = (value, time)
