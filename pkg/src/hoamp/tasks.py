"""Task framework and concrete tasks/protocols.

A task relates input vectors to output vectors; undecided slots are ``None``
and the relation is closed under replacing decided slots with ``None``.
Membership is therefore checked against a base set of fully-decided output
vectors: a partial vector is valid iff it is a reduction of some valid full
vector.

A task is colorless when processes may freely adopt each other's inputs and
outputs (value-set containment closure); the classifier verifies the
quantified definition by brute force over the finite alphabets.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import BOT, CapacityError, DomainError, canonical_json
from .protocol import Protocol


def val_set(vec) -> frozenset:
    """The set of non-None values in a vector."""
    return frozenset(v for v in vec if v is not None)


def _reduces_to(partial, full) -> bool:
    return all(a is None or a == b for a, b in zip(partial, full))


@dataclass(frozen=True)
class Task:
    """Finite task: input vectors, base (fully decided) output vectors, and a
    membership predicate over base vectors.

    ``colorless_flag`` is "declared", "verified", or "colored"; the
    classifier upgrades "declared" claims.
    """

    name: str
    n: int
    input_alphabet: tuple
    output_alphabet: tuple
    inputs: frozenset
    base_outputs: frozenset
    base_delta: Callable  # (I, O_full) -> bool
    colorless_flag: str = "declared"
    params: dict = field(default_factory=dict, compare=False)

    def check_output(self, I: tuple, O: tuple) -> bool:
        """Relation membership including None-closure."""
        if tuple(I) not in self.inputs:
            raise DomainError(f"input vector {I} is not in the task's input set")
        if len(O) != self.n:
            return False
        O = tuple(O)
        if all(v is None for v in O):
            return True
        return any(
            _reduces_to(O, B) and self.base_delta(tuple(I), B)
            for B in self.base_outputs
        )

    def output_space(self):
        """All vectors over the output alphabet plus None (the closed output
        vector set is a subset of this)."""
        return itertools.product(self.output_alphabet + (BOT,), repeat=self.n)

    def verify_bot_closure(self, sample_cap: int = 200000) -> bool:
        """Every member's None-reductions are members (holds by construction;
        this re-verifies through the public membership check)."""
        count = 0
        for I in sorted(self.inputs):
            for B in sorted(self.base_outputs):
                if not self.base_delta(I, B):
                    continue
                for mask in itertools.product((False, True), repeat=self.n):
                    O = tuple(BOT if m else v for m, v in zip(mask, B))
                    if not self.check_output(I, O):
                        return False
                    count += 1
                    if count >= sample_cap:
                        return True
        return True

    def to_json_dict(self) -> dict:
        d = {
            "name": self.name,
            "n": self.n,
            "input_alphabet": list(self.input_alphabet),
            "output_alphabet": list(self.output_alphabet),
            "params": self.params,
        }
        if self.name == "explicit":
            d["pairs"] = sorted(
                [list(I), list(O)]
                for I in self.inputs
                for O in self.base_outputs
                if self.base_delta(I, O)
            )
            d["inputs"] = sorted(list(I) for I in self.inputs)
        return d

    def dumps(self) -> str:
        return canonical_json(self.to_json_dict())


def check_output(task: Task, I, O) -> bool:
    return task.check_output(tuple(I), tuple(O))


def load_task(text: str) -> Task:
    """Task file format: alphabets plus either a builtin relation id with
    parameters or explicit (input, output) pairs."""
    d = json.loads(text)
    name = d["name"]
    params = d.get("params", {})
    if name == "consensus":
        return make_consensus(d["n"], tuple(d["input_alphabet"]))
    if name == "kset":
        return make_kset(d["n"], params["k"], tuple(d["input_alphabet"]))
    if name == "renaming":
        return make_renaming(d["n"], params["M"], params["N"])
    if name == "identity":
        return make_identity(d["n"], tuple(d["input_alphabet"]))
    if name == "explicit":
        pairs = [(tuple(I), tuple(O)) for I, O in d["pairs"]]
        inputs = frozenset(tuple(I) for I in d["inputs"])
        pair_set = frozenset(pairs)
        return Task(
            "explicit", d["n"], tuple(d["input_alphabet"]),
            tuple(d["output_alphabet"]), inputs,
            frozenset(O for _, O in pairs),
            lambda I, O, _ps=pair_set: (I, O) in _ps,
        )
    raise DomainError(f"unknown task kind: {name}")


# ---------------------------------------------------------------------------
# Colorless classification
# ---------------------------------------------------------------------------

def is_colorless(task: Task, cap: int = 50_000_000) -> bool:
    violation = find_colorless_violation(task, cap)
    return violation is None


def find_colorless_violation(task: Task, cap: int = 50_000_000):
    """Brute-force check of the adoption-closure definition; returns a
    violating (I, O, I', O') quadruple or None.

    The closure must hold over the None-closed output space, so candidates
    range over all output-alphabet-plus-None vectors.
    """
    inputs = sorted(task.inputs)
    out_space = [tuple(O) for O in task.output_space()]
    members = {}
    for I in inputs:
        members[I] = [O for O in out_space if task.check_output(I, O)]
    work = sum(len(v) for v in members.values()) * (len(inputs) + len(out_space))
    if work > cap:
        raise CapacityError(
            f"colorless check needs ~{work} membership tests, cap is {cap}"
        )
    member_sets = {I: set(v) for I, v in members.items()}
    for I in inputs:
        for O in members[I]:
            vo = val_set(O)
            for I2 in inputs:
                if val_set(I) <= val_set(I2) and O not in member_sets[I2]:
                    return (I, O, I2, O)
            for O2 in out_space:
                if val_set(O2) <= vo and O2 not in member_sets[I]:
                    return (I, O, I, O2)
    return None


# ---------------------------------------------------------------------------
# Task constructors
# ---------------------------------------------------------------------------

def make_consensus(n: int, values) -> Task:
    values = tuple(sorted(set(values)))
    inputs = frozenset(itertools.product(values, repeat=n))
    base = frozenset((v,) * n for v in values)

    def delta(I, O):
        return O[0] in val_set(I) and all(o == O[0] for o in O)

    return Task("consensus", n, values, values, inputs, base, delta,
                colorless_flag="declared", params={})


def make_kset(n: int, k: int, values) -> Task:
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}")
    values = tuple(sorted(set(values)))
    inputs = frozenset(itertools.product(values, repeat=n))
    base = frozenset(
        O for O in itertools.product(values, repeat=n) if len(set(O)) <= k
    )

    def delta(I, O):
        return len(set(O)) <= k and val_set(O) <= val_set(I)

    return Task("kset", n, values, values, inputs, base, delta,
                colorless_flag="declared", params={"k": k})


def make_renaming(n: int, M: int, N: int) -> Task:
    """Distinct initial names from [1, M] map to distinct new names from
    [1, N]; requires M > N to rule out the identity protocol."""
    if not M > N:
        raise DomainError(f"renaming requires M > N, got M={M}, N={N}")
    if M < n:
        raise DomainError(f"need at least n={n} distinct initial names, M={M}")
    old = tuple(range(1, M + 1))
    new = tuple(range(1, N + 1))
    inputs = frozenset(itertools.permutations(old, n))
    base = frozenset(itertools.permutations(new, n)) if N >= n else frozenset()

    def delta(I, O):
        return len(set(O)) == n and all(1 <= o <= N for o in O)

    return Task("renaming", n, old, new, inputs, base, delta,
                colorless_flag="colored", params={"M": M, "N": N})


def make_identity(n: int, values) -> Task:
    """Each decided process outputs its own input: the minimal colored toy."""
    values = tuple(sorted(set(values)))
    inputs = frozenset(itertools.product(values, repeat=n))
    base = inputs

    def delta(I, O):
        return tuple(O) == tuple(I)

    return Task("identity", n, values, values, inputs, base, delta,
                colorless_flag="colored", params={})


# ---------------------------------------------------------------------------
# Concrete protocols
# ---------------------------------------------------------------------------

class MinSetAgreementProtocol(Protocol):
    """One round of exchanging inputs, then decide the minimum received."""

    decision_fn_id = "min-of-first-round"

    def init(self, pid, input_value):
        return input_value  # round-1 broadcast is the bare input

    def on_receive(self, state, received):
        if isinstance(state, tuple) and state and state[0] == "done":
            return state, None, state[1]
        if not received:
            return state, None, state
        return ("done", state), min(received), state


def min_set_agreement_protocol(n: int) -> MinSetAgreementProtocol:
    return MinSetAgreementProtocol()


class EchoProtocol(Protocol):
    """Broadcasts a counter forever; never decides.  Useful as a neutral
    payload generator for validity and view checks."""

    decision_fn_id = "never"

    def init(self, pid, input_value):
        return ("echo", pid, 0, input_value)

    def on_receive(self, state, received):
        _, pid, k, x = state
        new = ("echo", pid, k + 1, x)
        return new, None, new


class BrokenConsensusProtocol(Protocol):
    """Deliberately wrong: decides its own input immediately."""

    decision_fn_id = "own-input"

    def init(self, pid, input_value):
        return input_value

    def on_receive(self, state, received):
        if isinstance(state, tuple) and state and state[0] == "done":
            return state, None, state[1]
        return ("done", state), state, state


def _merge_facts(received, me, senders_of):
    facts = set()
    for m in received:
        facts |= set(m[5])
    facts |= {(me, s) for s in senders_of if s != me}
    return frozenset(facts)


class _ReflectionGated(Protocol):
    """Shared skeleton: broadcast (tag, pid, round, input, round1-min, heard
    facts); decide once some other process is seen to have heard me directly.

    Messages carry (hearer, heard) pairs, gossiped transitively, so a process
    whose influence propagates eventually observes its own reflection; one
    whose influence never leaves it cannot, and stays undecided (it is exempt
    in the silenced-faulty reading).
    """

    tag = "refl"

    def init(self, pid, input_value):
        return (self.tag, pid, 0, input_value, None, (), False)

    def decide_value(self, state):
        raise NotImplementedError

    def on_receive(self, state, received):
        tag, pid, r, x, r1min, facts, decided = state
        r += 1
        senders = [m[1] for m in received]
        if r == 1:
            vals = [m[3] for m in received]
            r1min = min(vals) if vals else x
        facts = _merge_facts(list(received) + [state], pid, senders)
        decision = None
        if not decided and any(h == pid and j != pid for j, h in facts):
            decision = self.decide_value((tag, pid, r, x, r1min, facts, decided))
            decided = True
        new = (tag, pid, r, x, r1min, tuple(sorted(facts)), decided)
        return new, decision, new


class GuardedMinProtocol(_ReflectionGated):
    """Colorless inner protocol: decide the minimum of round-1 received
    inputs, gated on reflection evidence."""

    tag = "gmin"
    decision_fn_id = "guarded-min"

    def decide_value(self, state):
        return state[4]


class IdentityReflectProtocol(_ReflectionGated):
    """Colored inner protocol: decide own input, gated on reflection."""

    tag = "idr"
    decision_fn_id = "guarded-identity"

    def decide_value(self, state):
        return state[3]


class EchoAmpProtocol(Protocol):
    """Step-counting echo for the asynchronous engine: broadcasts a counter,
    decides its own input after a fixed number of steps."""

    decision_fn_id = "echo-decide-after-k"

    def __init__(self, decide_after: int = 3):
        self.decide_after = decide_after

    def init(self, pid, input_value):
        return (pid, input_value, 0)

    def on_receive(self, state, received):
        pid, x, k = state
        k += 1
        decision = x if k == self.decide_after else None
        return (pid, x, k), decision, ("echo", pid, k, x)


# ---------------------------------------------------------------------------
# Renaming in the asynchronous model
# ---------------------------------------------------------------------------

def _entries_to_dict(entries):
    return {name: (tag, sugg, dec) for name, tag, sugg, dec in entries}

def _dict_to_entries(d):
    return tuple(sorted((name, t, s, dec) for name, (t, s, dec) in d.items()))


def _must_move(d, name):
    tag, sugg, dec = d[name]
    if dec:
        return False
    if sugg is None:
        return True
    for other, (t2, s2, dec2) in d.items():
        if other != name and s2 == sugg and (dec2 or other < name):
            return True
    return False


def _resuggest(d, me):
    contenders = sorted(y for y in d if _must_move(d, y))
    if me not in contenders:
        return d
    rank = contenders.index(me) + 1
    excluded = {s for y, (t, s, dec) in d.items()
                if y != me and y not in contenders and s is not None}
    candidate, free_seen = 0, 0
    while free_seen < rank:
        candidate += 1
        if candidate not in excluded:
            free_seen += 1
    tag, sugg, dec = d[me]
    if sugg == candidate:
        return d
    d = dict(d)
    d[me] = (tag + 1, candidate, False)
    return d


class RenamingSuggestProtocol(Protocol):
    """Stable-set renaming with rank-based suggestions.

    Each step broadcasts the full table of known names: (version tag, current
    name suggestion, decided flag) per initial name.  Tables merge by highest
    tag.  A process whose suggestion is missing or clashes with a decided or
    smaller-named process re-suggests: its rank among the clashing ("moving")
    names selects the rank-th name not suggested by any settled name.  It
    decides its suggestion once (a) nobody in its table shares it and (b)
    n - f - 1 distinct other processes have echoed its exact current table.

    The echo requirement makes decisions safe: two conflicting decisions
    would need a common witness whose monotone table passed through both
    deciders' final tables, forcing the later decider to see the earlier
    decider's equal suggestion and refuse.
    """

    decision_fn_id = "rank-over-stable-name-sets"

    def __init__(self, n: int, f: int):
        if not n > 2 * f:
            raise DomainError("renaming protocol requires n > 2f")
        self.n = n
        self.f = f

    def init(self, pid, input_value):
        entries = ((input_value, 0, None, False),)
        return ("rn", input_value, entries, (), False)

    def on_receive(self, state, received):
        _, me, entries, last_seen, decided = state
        d = _entries_to_dict(entries)
        seen = dict(last_seen)
        for m in received:
            if not (isinstance(m, tuple) and len(m) >= 3 and m[0] == "rn"):
                continue
            sender, their_entries = m[1], m[2]
            seen[sender] = their_entries
            for name, tag, sugg, dec in their_entries:
                cur = d.get(name)
                if cur is None or tag > cur[0]:
                    d[name] = (tag, sugg, dec)
        decision = None
        if not decided:
            d = _resuggest(d, me)
            tag, sugg, dec = d[me]
            clash = any(y != me and s == sugg for y, (t, s, _x) in d.items())
            my_entries = _dict_to_entries(d)
            echoes = sum(
                1 for sender, their in seen.items()
                if sender != me and their == my_entries
            )
            if sugg is not None and not clash and echoes >= self.n - self.f - 1:
                decision = sugg
                decided = True
                d[me] = (tag, sugg, True)
        new_entries = _dict_to_entries(d)
        new_state = ("rn", me, new_entries, tuple(sorted(seen.items())), decided)
        return new_state, decision, ("rn", me, new_entries)


def renaming_amp_protocol(n: int, f: int) -> RenamingSuggestProtocol:
    """The asynchronous renaming protocol for new name space of size n + f.

    Duplicate initial names are a domain error (checked by the task's input
    set; the protocol also keys its table by name)."""
    return RenamingSuggestProtocol(n, f)


# ---------------------------------------------------------------------------
# Anonymous decision functions over view sequences
# ---------------------------------------------------------------------------

class ModNameDecision:
    """Toy anonymous rule: new name = (initial name) mod N, shifted to [1, N].
    Decides as soon as one round has passed."""

    def __init__(self, N: int):
        self.N = N

    def __call__(self, view_seq):
        if len(view_seq) < 2:
            return None
        return ((view_seq[-1].own_input - 1) % self.N) + 1


class RankOverStableNames:
    """The renaming protocol's name-choice rule read off a view sequence:
    once the set of initial names visible in the view has not grown for
    ``settle`` rounds, decide the rank of the own name within it.

    This is the anonymous decision function used for cross-model experiments;
    in its home model the protocol additionally waits for echoes of its table
    before deciding, which no view-only rule can observe.
    """

    def __init__(self, settle: int = 2):
        self.settle = settle

    def __call__(self, view_seq):
        for r in range(self.settle, len(view_seq)):
            if view_seq[r].names == view_seq[r - self.settle].names:
                ordered = sorted(view_seq[r].names)
                return ordered.index(view_seq[r].own_input) + 1
        return None


def renaming_view_decision_fn(settle: int = 2) -> RankOverStableNames:
    return RankOverStableNames(settle)
