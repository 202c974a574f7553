"""Lockstep round engine for the omission-bounded round models.

Each round every process sends, then receives per the round's communication
graph, then computes.  Events are totally ordered round-robin: all sends
p1..pn, then all receives p1..pn, which is one fixed order consistent with
every per-process order and makes runs reproducible.

The crash-tolerant variant lets a subset of processes stop producing events
from a given round on; those are the runs the crash-to-omission schedule
transform maps back into the plain omission model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    CommunicationGraph,
    DomainError,
    LassoSchedule,
    ScheduleError,
)
from .protocol import (
    DecisionTracker,
    Protocol,
    RandomizedProtocol,
    RoundRecord,
    Run,
    ValidityReport,
    sort_received,
)
from .views import EventLog


@dataclass(frozen=True)
class CrashMap:
    """Per-process optional crash round: a crashed process produces no events
    from its crash round on."""

    crash_rounds: tuple[tuple[int, int], ...] = ()

    @classmethod
    def of(cls, mapping: dict[int, int]) -> "CrashMap":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[int, int]:
        return dict(self.crash_rounds)

    def crashed_at(self, p: int) -> Optional[int]:
        return self.as_dict().get(p)

    @property
    def crashed(self) -> frozenset[int]:
        return frozenset(p for p, _ in self.crash_rounds)

    def alive(self, p: int, r: int) -> bool:
        c = self.crashed_at(p)
        return c is None or r < c


EMPTY_CRASHES = CrashMap()


def _execute_rounds(protocol: Protocol, inputs, schedule: LassoSchedule,
                    round_budget: int, crashes: CrashMap, model: str,
                    coins=None, track_views: bool = True) -> Run:
    n = schedule.n
    if len(inputs) != n:
        raise DomainError(f"expected {n} inputs, got {len(inputs)}")
    if round_budget < 1:
        raise DomainError("round_budget must be >= 1")
    randomized = isinstance(protocol, RandomizedProtocol)
    if randomized and coins is None:
        raise DomainError("randomized protocol requires coin streams")

    states = {}
    out_msgs = {}
    for p in range(1, n + 1):
        states[p] = protocol.init(p, inputs[p - 1])
        out_msgs[p] = states[p]  # initial broadcast is the initial state

    log = EventLog() if track_views else None
    view_heads: dict = {}
    latest_event: dict[int, int] = {}
    if log is not None:
        for p in range(1, n + 1):
            idx = log.append("input", p, 0, inputs[p - 1])
            latest_event[p] = idx
            view_heads[(p, 0)] = idx

    tracker = DecisionTracker()
    records: list[RoundRecord] = []

    for r in range(1, round_budget + 1):
        graph = schedule.resolve_round(r)
        senders = [p for p in range(1, n + 1) if crashes.alive(p, r)]
        sends = {p: out_msgs[p] for p in senders}
        send_events: dict[int, int] = {}
        if log is not None:
            for p in senders:
                idx = log.append("send", p, r, sends[p], includes=(latest_event[p],))
                send_events[p] = idx
                latest_event[p] = idx

        received: dict[int, tuple] = {}
        for p in senders:
            pairs = tuple(
                (j, sends[j]) for j in sorted(graph.in_set(p)) if j in sends
            )
            received[p] = pairs
            payloads = sort_received([m for _, m in pairs])
            if randomized:
                new_state, decision, nxt = protocol.on_receive(
                    states[p], payloads, coin=coins[p])
            else:
                new_state, decision, nxt = protocol.on_receive(states[p], payloads)
            states[p] = new_state
            out_msgs[p] = nxt
            if log is not None:
                includes = (latest_event[p],) + tuple(
                    send_events[j] for j, _ in pairs
                )
                idx = log.append("recv", p, r, None, includes=includes)
                latest_event[p] = idx
                if decision is not None and p not in tracker.decisions:
                    idx = log.append("decide", p, r, decision,
                                     includes=(latest_event[p],))
                    latest_event[p] = idx
                view_heads[(p, r)] = latest_event[p]
            tracker.record(p, decision, r)
        records.append(RoundRecord(r, sends, received))

    faulty = crashes.crashed if model == "CFHO" else frozenset()
    return Run(
        model=model,
        n=n,
        f=schedule.f,
        inputs=tuple(inputs),
        records=records,
        decisions=tracker.decisions,
        faulty=faulty,
        log=log,
        view_heads=view_heads,
        schedule_fingerprint=schedule.dumps(),
    )


def run_ho(protocol: Protocol, inputs, schedule: LassoSchedule,
           round_budget: int, coins=None, track_views: bool = True) -> Run:
    """Execute ``round_budget`` lockstep rounds.  No process is faulty."""
    return _execute_rounds(protocol, inputs, schedule, round_budget,
                           EMPTY_CRASHES, "HO", coins, track_views)


def run_cfho(protocol: Protocol, inputs, schedule: LassoSchedule,
             crashes: CrashMap, round_budget: int, coins=None,
             track_views: bool = True) -> Run:
    """As ``run_ho`` but processes named in ``crashes`` stop producing events
    from their crash round; they are classified faulty and need not decide."""
    for p, r in crashes.crash_rounds:
        if not 1 <= p <= schedule.n:
            raise DomainError(f"crash map names process {p} outside [1, {schedule.n}]")
        if r < 1:
            raise DomainError("crash rounds are 1-based")
    return _execute_rounds(protocol, inputs, schedule, round_budget,
                           crashes, "CFHO", coins, track_views)


def run_sfho(protocol: Protocol, inputs, schedule: LassoSchedule,
             round_budget: int, coins=None, track_views: bool = True) -> Run:
    """Execution is identical to ``run_ho``; the faulty set is the silenced
    processes of the schedule (fault classification lives with the silence
    analysis)."""
    from .silence import silenced_processes

    run = _execute_rounds(protocol, inputs, schedule, round_budget,
                          EMPTY_CRASHES, "SFHO", coins, track_views)
    run.faulty = silenced_processes(schedule)
    return run


def check_ho_validity(run: Run) -> ValidityReport:
    """Per-round, per-process checks: Weak Liveness (>= n - f received,
    self included), Integrity (received messages were sent this round),
    No Duplicates (at most one message per neighbor)."""
    report = ValidityReport()
    n, f = run.n, run.f
    for rec in run.records:
        if not isinstance(rec, RoundRecord):
            raise DomainError("check_ho_validity applies to round-based runs")
        for p, pairs in sorted(rec.received.items()):
            senders = [s for s, _ in pairs]
            ok = len(pairs) >= n - f and p in senders
            report.add("weak_liveness", ok, rec.round, p,
                       "" if ok else f"received {len(pairs)} messages, self "
                       f"{'included' if p in senders else 'missing'}")
            ok = all(s in rec.sends and rec.sends[s] == m for s, m in pairs)
            report.add("integrity", ok, rec.round, p,
                       "" if ok else "a received message was not sent this round")
            ok = len(set(senders)) == len(senders)
            report.add("no_duplicates", ok, rec.round, p,
                       "" if ok else "duplicate sender in received set")
    return report


def cfho_schedule_to_ho(schedule: LassoSchedule, crashes: CrashMap) -> LassoSchedule:
    """Rewrites a crash pattern as pure omissions: from its crash round on, a
    crashed process is dropped from everyone else's in-neighbor sets and is
    given in-neighbors = itself plus all never-crashing processes.

    Raises ``ScheduleError`` naming the first round whose rewritten graph
    falls outside the valid graph family.
    """
    if not crashes.crash_rounds:
        return schedule
    n, f = schedule.n, schedule.f
    crashed_all = crashes.crashed
    noncrashed = frozenset(p for p in range(1, n + 1) if p not in crashed_all)

    def transform(g: CommunicationGraph, r: int) -> CommunicationGraph:
        down = frozenset(p for p in crashed_all
                         if crashes.crashed_at(p) is not None and r >= crashes.crashed_at(p))
        if not down:
            return g
        new_sets = []
        for q in range(1, n + 1):
            if q in down:
                new_sets.append(frozenset({q}) | noncrashed)
            else:
                new_sets.append(g.in_set(q) - down)
        out = CommunicationGraph(n, tuple(new_sets))
        for q in range(1, n + 1):
            if len(out.in_set(q)) < n - f:
                raise ScheduleError(
                    f"round {r}: rewritten in-neighbors of p{q} has size "
                    f"{len(out.in_set(q))} < n - f = {n - f}"
                )
        return out

    last_crash = max(r for _, r in crashes.crash_rounds)
    prefix_len = max(len(schedule.prefix), last_crash - 1)
    new_prefix = tuple(
        transform(schedule.resolve_round(r), r) for r in range(1, prefix_len + 1)
    )
    cycle_len = len(schedule.cycle)
    new_cycle = tuple(
        transform(schedule.resolve_round(prefix_len + 1 + j), prefix_len + 1 + j)
        for j in range(cycle_len)
    )
    return LassoSchedule(n, f, new_prefix, new_cycle)
