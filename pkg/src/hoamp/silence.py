"""Influence propagation analysis on lasso schedules.

A process's reach from round r is the transitive closure of message
deliveries originating at it: who hears it in round r, who hears those in
round r+1, and so on.  The reach sequence is monotone (self-loops), so on a
lasso its fixpoint is certified exactly: once the set stops growing for a
full cycle past the prefix, it can never grow again.

A process is silenced from round r when its reach fixpoint from r has size
at most f; silenced processes are the faulty ones in the silenced-faulty
variant of the round model.  The existential "some round r" only needs to
range over prefix + one cycle of start rounds, because reach depends only on
the graph suffix and suffixes repeat with the cycle phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import DomainError, LassoSchedule
from .protocol import Run, ValidityReport


def receivers_of(schedule: LassoSchedule, i: int, r: int) -> frozenset[int]:
    """Processes that receive a message from process ``i`` in round ``r``."""
    return schedule.resolve_round(r).receivers_of(i)


def reach_set(schedule: LassoSchedule, i: int, r: int, t: int) -> frozenset[int]:
    """Processes reached by ``i``'s influence between rounds ``r`` and ``t``:
    {i} when t == r, otherwise the union of receivers at round t-1 over the
    reach through round t-1."""
    if not 1 <= r <= t:
        raise DomainError(f"need 1 <= r <= t, got r={r}, t={t}")
    cur = frozenset([i])
    for u in range(r, t):
        nxt = frozenset()
        for j in cur:
            nxt |= receivers_of(schedule, j, u)
        cur = nxt
    return cur


@dataclass(frozen=True)
class ReachTable:
    """Debug export of a reach fixpoint computation."""

    source: int
    start_round: int
    sets: tuple[tuple[int, frozenset[int]], ...]  # (through-round, reach set)
    fixpoint_round: int
    fixpoint: frozenset[int]

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "start_round": self.start_round,
            "sets": {t: sorted(s) for t, s in self.sets},
            "fixpoint_round": self.fixpoint_round,
            "fixpoint": sorted(self.fixpoint),
        }


def reach_table(schedule: LassoSchedule, i: int, r: int) -> ReachTable:
    """Iterates the reach sequence until the fixpoint is certified: no growth
    across one full cycle length at rounds past the prefix."""
    prefix_len = len(schedule.prefix)
    cycle_len = len(schedule.cycle)
    cur = frozenset([i])
    sets = [(r, cur)]
    fixpoint_round = r
    stable = 0
    t = r
    while True:
        if cur == frozenset(range(1, schedule.n + 1)):
            break  # cannot grow further
        nxt = frozenset()
        for j in cur:
            nxt |= receivers_of(schedule, j, t)
        t += 1
        if nxt == cur:
            if t - 1 > prefix_len:
                stable += 1
                if stable >= cycle_len:
                    break
        else:
            stable = 0
            fixpoint_round = t
            sets.append((t, nxt))
        cur = nxt
    return ReachTable(i, r, tuple(sets), fixpoint_round, cur)


def reach_fixpoint(schedule: LassoSchedule, i: int, r: int) -> frozenset[int]:
    """The union of reach sets over all rounds >= r (the monotone fixpoint)."""
    return reach_table(schedule, i, r).fixpoint


def silenced_from(schedule: LassoSchedule, i: int) -> Optional[int]:
    """The earliest round from which ``i``'s reach fixpoint has size <= f,
    or None if there is none.  Start rounds beyond prefix + cycle repeat."""
    for r in range(1, schedule.phase_range + 1):
        if len(reach_fixpoint(schedule, i, r)) <= schedule.f:
            return r
    return None


def silenced_processes(schedule: LassoSchedule) -> frozenset[int]:
    return frozenset(
        i for i in range(1, schedule.n + 1)
        if silenced_from(schedule, i) is not None
    )


def check_reach_dichotomy(schedule: LassoSchedule) -> ValidityReport:
    """Per process, the biconditional: not silenced iff the reach fixpoint
    from every start round (over the phase range) covers all n processes.

    Meaningful for n > f: influence that outgrows f processes floods the
    whole system.
    """
    n, f = schedule.n, schedule.f
    if n <= f:
        raise DomainError("reach dichotomy requires n > f")
    report = ValidityReport()
    for i in range(1, n + 1):
        not_silenced = silenced_from(schedule, i) is None
        full_everywhere = all(
            len(reach_fixpoint(schedule, i, r)) == n
            for r in range(1, schedule.phase_range + 1)
        )
        ok = not_silenced == full_everywhere
        report.add("reach_dichotomy", ok, None, i,
                   "" if ok else f"not_silenced={not_silenced} but "
                   f"full_reach_everywhere={full_everywhere}")
    return report


def check_silenced_bound(schedule: LassoSchedule) -> ValidityReport:
    """For n > 2f there are at most f silenced processes."""
    n, f = schedule.n, schedule.f
    if n <= 2 * f:
        raise DomainError("silenced-count bound requires n > 2f")
    sil = silenced_processes(schedule)
    report = ValidityReport()
    report.add("silenced_bound", len(sil) <= f, None, None,
               f"silenced={sorted(sil)}")
    return report


def check_view_lag(run: Run, schedule: Optional[LassoSchedule] = None) -> ValidityReport:
    """For a single-omission run with a process silenced from round R, that
    process's round-r view must contain the round-(r-2) views of all
    processes, for every R + 1 <= r <= budget.

    Vacuously passes when no process is silenced.  Stated for f = 1, n > 2;
    other parameters are a precondition error.
    """
    if schedule is None:
        schedule = LassoSchedule.loads(run.schedule_fingerprint)
    if schedule.f != 1 or schedule.n <= 2:
        raise DomainError("view-lag check is stated for f = 1, n > 2")
    report = ValidityReport()
    budget = len(run.records)
    checked_any = False
    for i in range(1, run.n + 1):
        start = silenced_from(schedule, i)
        if start is None:
            continue
        for r in range(start + 1, budget + 1):
            view_i = run.view(i, r)
            for j in range(1, run.n + 1):
                checked_any = True
                ok = view_i.contains(run.view(j, r - 2))
                report.add("view_lag", ok, r, i,
                           "" if ok else f"round-{r} view of p{i} misses "
                           f"round-{r - 2} view of p{j}")
    if not checked_any:
        report.add("view_lag", True, None, None, "no silenced process: vacuous")
    return report
