"""Asynchronous message-passing engine driven by step schedules.

A scheduler step hands one process a batch of pending messages (possibly
none), the process computes once and broadcasts exactly one message.  With
single-message batches this is exactly the atomic receive/compute/send step
model; batches only merge consecutive receives at one process.

Message references in schedules are FIFO per (sender, recipient) channel,
so Integrity and No Duplicates are enforced by construction: a delivery pops
the channel queue and an empty pop is a schedule error, detectable at load
because every step sends exactly one broadcast.

Fairness of a lasso is decided symbolically on a bounded unrolling: the
delivery pattern of cycle messages repeats with the cycle, so checking the
prefix plus one cycle's sends against two further cycles of deliveries,
together with non-negative channel drift, covers all unrollings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    AmpLassoSchedule,
    DomainError,
    ProtocolViolation,
    ScheduleError,
)
from .protocol import (
    DecisionTracker,
    FlpProtocol,
    Protocol,
    RandomizedProtocol,
    Run,
    StepRecord,
    ValidityReport,
    sort_received,
)


@dataclass
class InTransit:
    """A broadcast message and its per-recipient delivery status."""

    id: tuple[int, int]            # (sender, per-sender sequence number)
    sender: int
    payload: object
    sent_step: int
    delivered: dict[int, int] = field(default_factory=dict)  # recipient -> step


def run_amp(protocol: Protocol, inputs, schedule: AmpLassoSchedule,
            step_budget: int, coins=None) -> Run:
    """Execute ``step_budget`` scheduler steps.  The faulty set is the set of
    processes absent from the cycle."""
    n = schedule.n
    if len(inputs) != n:
        raise DomainError(f"expected {n} inputs, got {len(inputs)}")
    if step_budget < 1:
        raise DomainError("step_budget must be >= 1")
    schedule.validate_structure()
    randomized = isinstance(protocol, RandomizedProtocol)
    if randomized and coins is None:
        raise DomainError("randomized protocol requires coin streams")

    states = {p: protocol.init(p, inputs[p - 1]) for p in range(1, n + 1)}
    seq = {p: 0 for p in range(1, n + 1)}
    channels: dict[tuple[int, int], deque] = {}
    messages: list[InTransit] = []
    tracker = DecisionTracker()
    records: list[StepRecord] = []

    for k in range(step_budget):
        action = schedule.action_at(k)
        p = action.process
        batch = []
        for s in action.deliver_from:
            q = channels.get((s, p))
            if not q:
                raise ScheduleError(
                    f"step {k}: delivery at p{p} from p{s} references an "
                    "unsent or already-delivered message"
                )
            msg: InTransit = q.popleft()
            msg.delivered[p] = k
            batch.append((s, msg.payload))
        payloads = sort_received([m for _, m in batch])
        if randomized:
            new_state, decision, out = protocol.on_receive(states[p], payloads,
                                                           coin=coins[p])
        else:
            new_state, decision, out = protocol.on_receive(states[p], payloads)
        if out is None:
            raise ProtocolViolation(
                f"process {p} produced no broadcast at step {k}; every step sends"
            )
        states[p] = new_state
        seq[p] += 1
        msg = InTransit((p, seq[p]), p, out, k)
        messages.append(msg)
        for q in range(1, n + 1):
            channels.setdefault((p, q), deque()).append(msg)
        tracker.record(p, decision, k)
        records.append(StepRecord(k, p, tuple(batch), out))

    run = Run(
        model="AMP",
        n=n,
        f=schedule.f,
        inputs=tuple(inputs),
        records=records,
        decisions=tracker.decisions,
        faulty=schedule.faulty_hint,
        schedule_fingerprint=schedule.dumps(),
    )
    run.extras["messages"] = messages
    return run


def check_amp_fairness(schedule: AmpLassoSchedule,
                       flp_liveness: bool = False) -> ValidityReport:
    """Verifies the four delivery conditions on the lasso.

    Integrity and No Duplicates are structural.  Liveness conditions are
    checked on prefix + 3 cycles: every message sent by a non-faulty process
    in the prefix or the first cycle iteration must reach every non-faulty
    process within two further cycle iterations, and no non-faulty channel
    may drain slower than it fills.  Messages of a faulty process (all sent
    in the prefix) must reach every non-faulty process except possibly the
    highest-indexed send, which quasi-liveness exempts.  With
    ``flp_liveness`` the exemption is dropped: non-faulty processes receive
    every message sent to them.
    """
    report = ValidityReport()
    try:
        schedule.validate_structure()
        report.add("integrity_no_duplicates", True)
    except ScheduleError as e:
        report.add("integrity_no_duplicates", False, detail=str(e))
        return report

    n = schedule.n
    faulty = schedule.faulty_hint
    nonfaulty = [p for p in range(1, n + 1) if p not in faulty]
    plen, clen = len(schedule.prefix), len(schedule.cycle)
    window = plen + 3 * clen
    checked_horizon = plen + clen  # sends up to here must land within window

    channels: dict[tuple[int, int], deque] = {}
    sent: list[InTransit] = []
    per_sender: dict[int, list[InTransit]] = {p: [] for p in range(1, n + 1)}
    for k in range(window):
        action = schedule.action_at(k)
        p = action.process
        for s in action.deliver_from:
            q = channels.get((s, p))
            msg = q.popleft()
            msg.delivered[p] = k
        msg = InTransit((p, len(per_sender[p]) + 1), p, None, k)
        sent.append(msg)
        per_sender[p].append(msg)
        for q in range(1, n + 1):
            channels.setdefault((p, q), deque()).append(msg)

    # channel drift: cycle deliveries must keep up with cycle sends
    cycle_sends = {p: sum(1 for a in schedule.cycle if a.process == p)
                   for p in range(1, n + 1)}
    cycle_delivers: dict[tuple[int, int], int] = {}
    for a in schedule.cycle:
        for s in a.deliver_from:
            key = (s, a.process)
            cycle_delivers[key] = cycle_delivers.get(key, 0) + 1
    for s in nonfaulty:
        for q in nonfaulty:
            drift = cycle_sends[s] - cycle_delivers.get((s, q), 0)
            ok = drift <= 0 or cycle_sends[s] == 0
            report.add("nonfaulty_liveness_drift", ok, process=q, detail=""
                       if ok else f"channel p{s}->p{q} backlog grows by {drift} per cycle")

    last_send_of_faulty = {
        p: per_sender[p][-1].id if per_sender[p] else None for p in faulty
    }
    for msg in sent:
        if msg.sent_step >= checked_horizon:
            continue
        sender_faulty = msg.sender in faulty
        exempt = (
            sender_faulty
            and not flp_liveness
            and last_send_of_faulty.get(msg.sender) == msg.id
        )
        for q in nonfaulty:
            delivered = q in msg.delivered and msg.delivered[q] < window
            if exempt:
                continue
            check = ("faulty_quasi_liveness" if sender_faulty
                     else "nonfaulty_liveness")
            if flp_liveness:
                check = "flp_liveness"
            report.add(check, delivered, process=q, detail=""
                       if delivered else f"message {msg.id} never delivered to p{q}")
    if not report.failures():
        # compact all-pass summary entries alongside the per-message results
        report.add("fairness_summary", True, detail="all delivery conditions hold")
    return report


# ---------------------------------------------------------------------------
# Point-to-point adapters
# ---------------------------------------------------------------------------

class _FlpAsAmp(Protocol):
    """Runs a point-to-point protocol over broadcasts: a send to j becomes a
    broadcast of (message, j) and only process j surfaces it."""

    def __init__(self, inner: FlpProtocol):
        self.inner = inner
        self.decision_fn_id = inner.decision_fn_id

    def init(self, pid, input_value):
        return (pid, self.inner.init(pid, input_value), ())

    def on_receive(self, state, received):
        pid, inner_state, _ = state
        surfaced = []
        for payload in received:
            if isinstance(payload, (tuple, list)) and payload and payload[0] == "flpbatch":
                for dest, m in payload[1]:
                    if dest == pid:
                        surfaced.append(m)
        decision = None
        out_sends = []
        if not surfaced:
            surfaced = [None]  # a step with nothing addressed here receives nothing
        for m in surfaced:
            inner_state, dec, sends = self.inner.on_receive(inner_state, m)
            out_sends.extend(sends)
            if dec is not None and decision is None:
                decision = dec
        new_state = (pid, inner_state, ())
        return new_state, decision, ("flpbatch", tuple(out_sends))


class _AmpAsFlp(FlpProtocol):
    """Runs a broadcast protocol over point-to-point sends: a broadcast
    becomes one send per destination; any receipt surfaces as the message."""

    def __init__(self, inner: Protocol, n: int):
        self.inner = inner
        self.n = n
        self.decision_fn_id = inner.decision_fn_id

    def init(self, pid, input_value):
        return self.inner.init(pid, input_value)

    def on_receive(self, state, message):
        payloads = (message,) if message is not None else ()
        new_state, decision, out = self.inner.on_receive(state, sort_received(payloads))
        sends = tuple((j, out) for j in range(1, self.n + 1))
        return new_state, decision, sends


def flp_to_amp(protocol: FlpProtocol) -> Protocol:
    return _FlpAsAmp(protocol)


def amp_to_flp(protocol: Protocol, n: int) -> FlpProtocol:
    return _AmpAsFlp(protocol, n)


def flp_adapters(direction: str):
    """Protocol transformer selector: ``flp_to_amp`` wraps a point-to-point
    protocol for the broadcast engine; ``amp_to_flp`` wraps a broadcast
    protocol behind point-to-point primitives."""
    if direction == "flp_to_amp":
        return flp_to_amp
    if direction == "amp_to_flp":
        return amp_to_flp
    raise DomainError(f"unknown adapter direction: {direction}")
