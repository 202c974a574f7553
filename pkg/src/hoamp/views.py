"""Event logs and full-information views.

A run's events live in an append-only arena; a process's view is a reference
into the arena (its latest event), and the view's content is the causal
closure of that event.  Views are therefore shared structurally rather than
copied, which keeps full-information histories affordable.

Anonymized views strip process identities: a process's anonymous view is its
input plus, per round, the multiset of anonymous views it received.  They are
hash-consed so equality and multiset ordering are O(1), which is what the
symmetry and collision experiments compare.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .core import HoampError, canonical_json


class ViewError(HoampError):
    pass


def _jsonable(x):
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    return x


@dataclass(frozen=True)
class Event:
    index: int
    kind: str        # "input" | "send" | "recv" | "coin" | "decide"
    process: int
    time: int        # round (HO family) or step index (AMP)
    payload: object
    includes: tuple[int, ...]  # causally included earlier events


class EventLog:
    """Append-only arena of events; acyclic because includes point backward."""

    def __init__(self):
        self.events: list[Event] = []
        self._closures: dict[int, frozenset[int]] = {}

    def append(self, kind: str, process: int, time: int, payload=None,
               includes: tuple[int, ...] = ()) -> int:
        idx = len(self.events)
        for j in includes:
            if not 0 <= j < idx:
                raise ViewError(f"include {j} not an earlier event than {idx}")
        self.events.append(Event(idx, kind, process, time, payload, includes))
        return idx

    def closure(self, idx: int) -> frozenset[int]:
        cached = self._closures.get(idx)
        if cached is not None:
            return cached
        acc = {idx}
        for j in self.events[idx].includes:
            acc |= self.closure(j)
        result = frozenset(acc)
        self._closures[idx] = result
        return result

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class View:
    """A process's complete local history up to a point: a log reference."""

    log: EventLog
    head: int

    def events(self) -> list[Event]:
        return [self.log.events[i] for i in sorted(self.log.closure(self.head))]

    def contains(self, other: "View") -> bool:
        if other.log is self.log:
            return other.head in self.log.closure(self.head)
        return other.canonical() in _canonical_closure_set(self)

    def canonical(self) -> str:
        """Canonical serialization: the closure with events renumbered in log
        order.  Two views are the same view iff their canonical forms match.
        """
        order = sorted(self.log.closure(self.head))
        renum = {old: new for new, old in enumerate(order)}
        events = [
            {
                "kind": e.kind,
                "process": e.process,
                "time": e.time,
                "payload": _jsonable(e.payload),
                "includes": [renum[j] for j in e.includes],
            }
            for e in (self.log.events[i] for i in order)
        ]
        return canonical_json({"head": renum[self.head], "events": events})

    @staticmethod
    def deserialize(text: str) -> "View":
        try:
            d = json.loads(text)
            log = EventLog()
            for e in d["events"]:
                log.append(e["kind"], e["process"], e["time"], e["payload"],
                           tuple(e["includes"]))
            return View(log, d["head"])
        except (KeyError, TypeError, ValueError) as e:
            raise ViewError(f"malformed serialized view: {e}") from e

    def __eq__(self, other):
        if not isinstance(other, View):
            return NotImplemented
        if self.log is other.log:
            return self.head == other.head
        return self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())


def _canonical_closure_set(view: View) -> set[str]:
    return {View(view.log, i).canonical() for i in view.log.closure(view.head)}


# ---------------------------------------------------------------------------
# Anonymized views
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnonView:
    """A process-identity-free view handle.

    ``key`` is a digest of the view's structure: equal keys mean equal
    anonymous views.  ``own_input`` is the input at the root of the owner's
    history; ``names`` collects every input value occurring anywhere in the
    view (useful for name-set protocols); ``round`` is 0 for the initial view.
    """

    key: str
    round: int
    own_input: object
    names: frozenset
    received_keys: tuple[str, ...] = ()


class AnonViewBuilder:
    """Hash-consing arena for anonymous views."""

    def __init__(self):
        self._nodes: dict[str, AnonView] = {}

    def initial(self, input_value) -> AnonView:
        key = hashlib.sha256(
            ("init:" + canonical_json(_jsonable(input_value))).encode()
        ).hexdigest()
        node = AnonView(key, 0, input_value, frozenset([input_value]))
        return self._nodes.setdefault(key, node)

    def extend(self, prev: AnonView, received: list[AnonView]) -> AnonView:
        child_keys = tuple(sorted(v.key for v in received))
        key = hashlib.sha256(
            ("node:" + prev.key + ":" + ",".join(child_keys)).encode()
        ).hexdigest()
        cached = self._nodes.get(key)
        if cached is not None:
            return cached
        names = prev.names
        for v in received:
            names |= v.names
        node = AnonView(key, prev.round + 1, prev.own_input, names, child_keys)
        self._nodes[key] = node
        return node


def build_anon_views(inputs: list, in_sets_per_round: list[list[frozenset[int]]]):
    """Anonymous views for a full-information run.

    ``inputs[i - 1]`` is process i's input; ``in_sets_per_round[r - 1][i - 1]``
    is the set of processes i heard from in round r.  Returns a map
    ``(process, round) -> AnonView`` with round 0 the initial view.
    """
    n = len(inputs)
    builder = AnonViewBuilder()
    views: dict[tuple[int, int], AnonView] = {}
    for i in range(1, n + 1):
        views[(i, 0)] = builder.initial(inputs[i - 1])
    for r, in_sets in enumerate(in_sets_per_round, start=1):
        for i in range(1, n + 1):
            received = [views[(j, r - 1)] for j in sorted(in_sets[i - 1])]
            views[(i, r)] = builder.extend(views[(i, r - 1)], received)
    return views


def anon_view_sequence(inputs: list, in_sets_per_round: list[list[frozenset[int]]],
                       process: int) -> tuple[AnonView, ...]:
    """The round-by-round anonymous views of one process (round 0 first)."""
    views = build_anon_views(inputs, in_sets_per_round)
    rounds = len(in_sets_per_round)
    return tuple(views[(process, r)] for r in range(rounds + 1))
