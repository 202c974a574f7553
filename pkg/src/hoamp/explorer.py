"""Bounded exhaustive exploration over round-graph execution trees.

The valid graphs for fixed (n, f) form a finite set: per process, any
in-neighbor set containing itself of size >= n - f, chosen independently.
Exploration walks every graph sequence up to a depth, checking the partial
output vector against the task after every round; branches are visited in
canonical graph-enumeration order so the first counterexample is stable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import (
    BOT,
    CapacityError,
    CommunicationGraph,
    DomainError,
    HoampError,
    LassoSchedule,
    ProtocolViolation,
)
from .protocol import Protocol, sort_received
from .tasks import Task
from .views import anon_view_sequence


class UndecidedError(HoampError):
    """A candidate run failed to decide within the round budget."""

    def __init__(self, candidate):
        super().__init__(f"candidate {candidate!r} did not decide within budget")
        self.candidate = candidate


def count_graphs(n: int, f: int) -> int:
    """Closed form: per process, the in-neighbor set is any superset of the
    self-loop with size >= n - f, chosen independently."""
    per_vertex = sum(math.comb(n - 1, k - 1) for k in range(max(1, n - f), n + 1))
    return per_vertex ** n


def enumerate_graphs(n: int, f: int, cap: int = 1_000_000) -> list[CommunicationGraph]:
    """All valid graphs in canonical (lexicographic in-neighbor) order."""
    if n < 1 or not 0 <= f <= n:
        raise DomainError(f"need n >= 1 and 0 <= f <= n, got n={n}, f={f}")
    total = count_graphs(n, f)
    if total > cap:
        raise CapacityError(f"graph family has {total} members, cap is {cap}")
    per_vertex: list[list[frozenset[int]]] = []
    for v in range(1, n + 1):
        others = [u for u in range(1, n + 1) if u != v]
        options = sorted(
            (frozenset({v}) | frozenset(c)
             for k in range(max(0, n - f - 1), n)
             for c in itertools.combinations(others, k)),
            key=lambda s: sorted(s),
        )
        per_vertex.append(options)
    graphs = [
        CommunicationGraph(n, combo) for combo in itertools.product(*per_vertex)
    ]
    assert len(graphs) == total
    return graphs


# ---------------------------------------------------------------------------
# Execution-tree exploration
# ---------------------------------------------------------------------------

@dataclass
class Counterexample:
    inputs: tuple
    graphs: tuple[CommunicationGraph, ...]
    outputs: tuple
    reason: str

    def replay_schedule(self, n: int, f: int) -> LassoSchedule:
        """A lasso that reproduces the violating rounds (then stays complete)."""
        return LassoSchedule(n, f, tuple(self.graphs),
                             (CommunicationGraph.complete(n),))

    def to_json_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "graphs": [g.to_lists() for g in self.graphs],
            "outputs": [o for o in self.outputs],
            "reason": self.reason,
        }


@dataclass
class Verdict:
    ok: bool
    mode: str
    depth: int
    inputs_explored: int
    leaves: int                      # full-depth branches per the whole sweep
    counterexample: Optional[Counterexample] = None
    undecided_leaves: int = 0
    extendable_leaves: int = 0
    stuck_leaves: int = 0
    notes: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "mode": self.mode,
            "depth": self.depth,
            "inputs_explored": self.inputs_explored,
            "leaves": self.leaves,
            "undecided_leaves": self.undecided_leaves,
            "extendable_leaves": self.extendable_leaves,
            "stuck_leaves": self.stuck_leaves,
            "counterexample": (self.counterexample.to_json_dict()
                               if self.counterexample else None),
            "notes": self.notes,
        }


def _round_step(protocol, graph, states, msgs, decisions, n):
    """One lockstep round without run-record overhead; returns new triples."""
    new_states = list(states)
    new_msgs = list(msgs)
    new_decisions = dict(decisions)
    for p in range(1, n + 1):
        payloads = sort_received([msgs[j - 1] for j in sorted(graph.in_set(p))])
        st, dec, out = protocol.on_receive(states[p - 1], payloads)
        new_states[p - 1] = st
        new_msgs[p - 1] = out
        if dec is not None:
            if p in new_decisions:
                raise ProtocolViolation(f"process {p} decided twice")
            new_decisions[p] = dec
    return tuple(new_states), tuple(new_msgs), new_decisions


def _outputs(decisions, n):
    return tuple(decisions.get(p, BOT) for p in range(1, n + 1))


def explore(protocol: Protocol, task: Task, n: int, f: int, depth: int,
            mode: str = "safety", cap: int = 10_000_000,
            extension_budget: int = 6,
            graph_cap: int = 1_000_000) -> Verdict:
    """Exhaustive sweep: every input vector, every graph sequence of length
    <= depth.  Safety mode checks each partial output vector against the
    task, returning the first (canonical-order) counterexample.  Decision
    mode additionally classifies full-depth leaves with undecided processes
    by whether an all-deliver extension gets them to decide.
    """
    if mode not in ("safety", "decision"):
        raise DomainError(f"unknown exploration mode: {mode}")
    if task.n != n:
        raise DomainError("task arity does not match n")
    graphs = enumerate_graphs(n, f, cap=graph_cap)
    inputs = sorted(task.inputs)
    branches = len(inputs) * (len(graphs) ** depth)
    if branches > cap:
        raise CapacityError(
            f"{branches} branches exceed the cap of {cap}; lower depth or n"
        )
    complete = CommunicationGraph.complete(n)
    verdict = Verdict(True, mode, depth, len(inputs), 0)

    def check(I, decisions, trail, states=None):
        O = _outputs(decisions, n)
        if not task.check_output(I, O):
            verdict.ok = False
            verdict.counterexample = Counterexample(
                I, tuple(trail), O, "partial output vector violates the task"
            )
            return False
        return True

    def extend_decides(states, msgs, decisions):
        for _ in range(extension_budget):
            if len(decisions) == n:
                break
            states, msgs, decisions = _round_step(
                protocol, complete, states, msgs, decisions, n)
        return len(decisions) == n

    def walk(I, states, msgs, decisions, round_no, trail):
        if not verdict.ok:
            return
        if round_no == depth:
            verdict.leaves += 1
            if len(decisions) < n:
                verdict.undecided_leaves += 1
                if mode == "decision":
                    if extend_decides(states, msgs, decisions):
                        verdict.extendable_leaves += 1
                    else:
                        verdict.stuck_leaves += 1
            return
        for g in graphs:
            st, ms, dec = _round_step(protocol, g, states, msgs, decisions, n)
            trail.append(g)
            if check(I, dec, trail):
                walk(I, st, ms, dec, round_no + 1, trail)
            trail.pop()
            if not verdict.ok:
                return

    for I in inputs:
        states = tuple(protocol.init(p, I[p - 1]) for p in range(1, n + 1))
        msgs = states
        if not check(I, {}, []):
            break
        walk(I, states, msgs, {}, 0, [])
        if not verdict.ok:
            break
    if mode == "decision" and verdict.stuck_leaves:
        verdict.ok = False
    return verdict


# ---------------------------------------------------------------------------
# The two-blind-processes schedule and the collision finder
# ---------------------------------------------------------------------------

def separation_schedule(n: int, f: int) -> LassoSchedule:
    """Single-graph cycle where the first n - 2 processes hear exactly each
    other, and the last two hear the first n - 2 plus themselves.  The last
    two processes are silenced from round 1 and never learn of each other.

    Requires 1 < f < n/2: each of the first n - 2 processes misses two
    messages per round, so the omission bound must be at least 2.
    """
    if not (1 < f and 2 * f < n):
        raise DomainError("separation schedule needs 1 < f < n/2")
    core = frozenset(range(1, n - 1))
    sets = [core] * (n - 2) + [core | {n - 1}, core | {n}]
    g = CommunicationGraph(n, tuple(sets))
    s = LassoSchedule(n, f, (), (g,))
    assert s.validate()
    return s


def _filler_name(fixed_names, candidate_names):
    return max(list(fixed_names) + list(candidate_names)) + 1


def candidate_decisions(delta: Callable, n: int, f: int, fixed_names,
                        candidate_names, round_budget: int) -> dict:
    """Runs the full-information pattern on the separation schedule once per
    candidate name placed at process n - 1 and applies the anonymous decision
    function to its view sequence.  The view sequence does not depend on the
    name at process n; a fresh filler name is used there.
    """
    if len(fixed_names) != n - 2:
        raise DomainError(f"need {n - 2} fixed names, got {len(fixed_names)}")
    if len(set(fixed_names) & set(candidate_names)) > 0:
        raise DomainError("candidate names must be disjoint from fixed names")
    schedule = separation_schedule(n, f)
    graph = schedule.cycle[0]
    in_sets = [[graph.in_set(p) for p in range(1, n + 1)]] * round_budget
    filler = _filler_name(fixed_names, candidate_names)
    decided = {}
    for a in candidate_names:
        inputs = tuple(fixed_names) + (a, filler)
        seq = anon_view_sequence(list(inputs), in_sets, n - 1)
        name = delta(seq)
        if name is None:
            raise UndecidedError(a)
        decided[a] = name
    return decided


def find_collision(delta: Callable, n: int, f: int, fixed_names,
                   candidate_names, round_budget: int = 8):
    """Two candidate initial names that the anonymous decision function maps
    to the same new name on the separation schedule, or None.

    With at least N + 1 decided candidates over N = n + f possible new names
    a collision always exists.  A candidate that does not decide within the
    budget raises ``UndecidedError`` naming it.
    """
    N = n + f
    if len(candidate_names) < N + 1:
        raise DomainError(f"need at least N + 1 = {N + 1} candidates")
    decided = candidate_decisions(delta, n, f, fixed_names, candidate_names,
                                  round_budget)
    for a, b in itertools.combinations(candidate_names, 2):
        if decided[a] == decided[b]:
            return (a, b)
    return None
