"""Random and canned schedule generators used by tests, demos, and the CLI.

All randomness flows through an explicit ``random.Random`` instance so every
generated schedule is reproducible from a seed.
"""

from __future__ import annotations

import itertools
import random

from .core import AmpLassoSchedule, AmpStep, CommunicationGraph, LassoSchedule


def random_graph(n: int, f: int, rng: random.Random) -> CommunicationGraph:
    """Uniform member of the valid graph family: per process, a uniformly
    random in-neighbor set containing itself with size >= n - f."""
    sets = []
    for v in range(1, n + 1):
        others = [u for u in range(1, n + 1) if u != v]
        choices = [
            frozenset({v}) | frozenset(c)
            for k in range(n - f - 1, n)
            for c in itertools.combinations(others, k)
        ]
        sets.append(rng.choice(choices))
    return CommunicationGraph(n, tuple(sets))


def random_lasso(n: int, f: int, rng: random.Random,
                 max_prefix: int = 2, max_cycle: int = 3) -> LassoSchedule:
    prefix = tuple(random_graph(n, f, rng) for _ in range(rng.randint(0, max_prefix)))
    cycle = tuple(random_graph(n, f, rng) for _ in range(rng.randint(1, max_cycle)))
    return LassoSchedule(n, f, prefix, cycle)


def round_robin_amp_lasso(n: int, f: int = 0) -> AmpLassoSchedule:
    """Everyone steps once with nothing, then forever: each process in turn
    receives one pending message from every sender.  Balanced, so every
    message is delivered with lag one cycle."""
    prefix = tuple(AmpStep(p) for p in range(1, n + 1))
    all_senders = tuple(range(1, n + 1))
    cycle = tuple(AmpStep(p, all_senders) for p in range(1, n + 1))
    return AmpLassoSchedule(n, f, prefix, cycle)


def make_fair_amp_lasso(n: int, f: int, rng: random.Random,
                        faulty: tuple[int, ...] = (),
                        drop_last_of_faulty: bool = True) -> AmpLassoSchedule:
    """A random fair schedule: the named faulty processes act only in the
    prefix; everyone else sends and is drained once per cycle iteration.

    Faulty processes take 1-3 prefix steps; all their messages are delivered
    to every surviving process inside the prefix, except possibly the final
    send (quasi-liveness allows dropping it)."""
    if len(faulty) > f:
        raise ValueError("more faulty processes than the bound allows")
    alive = [p for p in range(1, n + 1) if p not in faulty]
    prefix: list[AmpStep] = []
    sends = {p: 0 for p in range(1, n + 1)}
    delivered: dict[tuple[int, int], int] = {}

    def step(p, sources=()):
        for s in sources:
            key = (s, p)
            assert delivered.get(key, 0) < sends[s]
            delivered[key] = delivered.get(key, 0) + 1
        sends[p] += 1
        prefix.append(AmpStep(p, tuple(sources)))

    # everyone primes the pump once, in random order
    first = list(range(1, n + 1))
    rng.shuffle(first)
    for p in first:
        step(p)
    # extra faulty steps, receiving from random available senders
    for p in sorted(faulty):
        for _ in range(rng.randint(0, 2)):
            sources = tuple(
                s for s in range(1, n + 1)
                if delivered.get((s, p), 0) < sends[s] and rng.random() < 0.5
            )
            step(p, sources)

    # drain every faulty sender to every survivor, except possibly the final
    # send of each faulty process (quasi-liveness exempts it)
    for q in alive:
        for p in sorted(faulty):
            target = sends[p] - (1 if drop_last_of_faulty else 0)
            while delivered.get((p, q), 0) < target:
                step(q, (p,))

    # one catch-up step per survivor, absorbing everything still owed from
    # alive senders; afterwards every alive channel holds exactly the one
    # message its sender's catch-up step produced, and the steady cycle
    # (one send and one delivery per channel per iteration) keeps it there
    pre_catchup_sends = dict(sends)
    for q in alive:
        owed = []
        for s in alive:
            owed += [s] * (pre_catchup_sends[s] - delivered.get((s, q), 0))
        step(q, tuple(owed))

    order = list(alive)
    rng.shuffle(order)
    cycle = tuple(AmpStep(p, tuple(alive)) for p in order)
    sched = AmpLassoSchedule(n, f, tuple(prefix), cycle)
    sched.validate_structure()
    return sched
