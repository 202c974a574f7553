import itertools
import random
from fractions import Fraction

import pytest

from hoamp.core import (
    AmpLassoSchedule,
    AmpStep,
    CommunicationGraph,
    GraphStructureError,
    LassoSchedule,
    ScheduleError,
    complete_lasso,
    lcp_distance,
    validate_communication_graph,
)


def naive_member(in_sets, n, f):
    """Independent membership oracle: direct reading of the definition."""
    for i in range(1, n + 1):
        s = in_sets[i - 1]
        if i not in s or len(s) < n - f:
            return False
    return True


def all_digraphs_with_vertices(n):
    """Every directed graph on [n], as in-neighbor sets (2^(n^2) of them)."""
    edges = [(u, v) for u in range(1, n + 1) for v in range(1, n + 1)]
    for subset in itertools.product((False, True), repeat=len(edges)):
        in_sets = [set() for _ in range(n)]
        for present, (u, v) in zip(subset, edges):
            if present:
                in_sets[v - 1].add(u)
        yield [frozenset(s) for s in in_sets]


def test_validate_examples():
    g = CommunicationGraph.complete(3)
    assert validate_communication_graph(g, 3, 1)
    lonely = CommunicationGraph.from_lists([[1], [1, 2, 3], [1, 2, 3]])
    assert not validate_communication_graph(lonely, 3, 1)


def test_validate_structural_error_distinct_from_false():
    bad = CommunicationGraph.from_lists([[1, 5], [1, 2], [1, 3]])
    with pytest.raises(GraphStructureError):
        validate_communication_graph(bad, 3, 1)
    with pytest.raises(GraphStructureError):
        validate_communication_graph(CommunicationGraph.complete(4), 3, 1)


@pytest.mark.parametrize("n,f", [(2, 0), (2, 1), (3, 0), (3, 1), (3, 2), (4, 1)])
def test_validate_agrees_with_naive_filter(n, f):
    count = 0
    for in_sets in all_digraphs_with_vertices(n):
        g = CommunicationGraph(n, tuple(in_sets))
        assert validate_communication_graph(g, n, f) == naive_member(in_sets, n, f)
        if naive_member(in_sets, n, f):
            count += 1
    if (n, f) == (3, 1):
        assert count == 27


def _g(lists):
    return CommunicationGraph.from_lists(lists)


G1 = _g([[1, 2, 3], [1, 2, 3], [1, 2, 3]])
G2 = _g([[1, 2], [1, 2, 3], [1, 2, 3]])
G3 = _g([[1, 2, 3], [2, 3], [1, 2, 3]])


def test_resolve_round_prefix_then_cycle_in_order():
    s = LassoSchedule(3, 1, (G1,), (G2, G3))
    # unrolled sequence: G1 G2 G3 G2 G3 ...
    assert s.resolve_round(1) == G1
    assert s.resolve_round(2) == G2
    assert s.resolve_round(3) == G3
    assert s.resolve_round(4) == G2
    assert s.resolve_round(5) == G3


def test_resolve_round_pure_cycle():
    s = LassoSchedule(3, 1, (), (G1,))
    for r in (1, 2, 7, 100):
        assert s.resolve_round(r) == G1


def test_empty_cycle_rejected():
    with pytest.raises(ScheduleError):
        LassoSchedule(3, 1, (G1,), ())


def test_schedule_file_roundtrip_byte_stable():
    s = LassoSchedule(3, 1, (G2,), (G1, G3))
    text = s.dumps()
    again = LassoSchedule.loads(text)
    assert again == s
    assert again.dumps() == text


def test_schedule_file_malformed():
    with pytest.raises(ScheduleError):
        LassoSchedule.loads("{not json")
    with pytest.raises(ScheduleError):
        LassoSchedule.loads('{"n": 3}')


# -- longest-common-prefix metric -------------------------------------------

def test_lcp_identical_lassos_zero():
    a = LassoSchedule(3, 1, (G1,), (G2, G3))
    b = LassoSchedule(3, 1, (G1,), (G2, G3))
    d = lcp_distance(a, b)
    assert d.exact and d.value == 0


def test_lcp_same_sequence_different_rolling_is_zero():
    # cycle [G] and [G, G] denote the same infinite sequence
    a = LassoSchedule(3, 1, (), (G1,))
    b = LassoSchedule(3, 1, (G1,), (G1, G1))
    d = lcp_distance(a, b)
    assert d.exact and d.value == 0


def test_lcp_first_difference_values():
    a = LassoSchedule(3, 1, (), (G1,))
    b = LassoSchedule(3, 1, (G2,), (G1,))
    d = lcp_distance(a, b)
    assert d.exact and d.value == 1 and d.diff_index == 0

    seq_a = [0, 0, 0, 0, 7, 9]
    seq_b = [0, 0, 0, 1, 7, 9]
    d = lcp_distance(seq_a, seq_b, horizon=6)
    assert d.exact and d.value == Fraction(1, 8) and d.diff_index == 3


def test_lcp_horizon_exhausted_is_inexact():
    # sequences differ first at index 5, beyond the scan horizon
    a = LassoSchedule(3, 1, (G1,) * 5, (G2,))
    b = LassoSchedule(3, 1, (G1,) * 5, (G3,))
    d = lcp_distance(a, b, horizon=3)
    assert not d.exact
    assert d.value == Fraction(1, 8)
    full = lcp_distance(a, b, horizon=64)
    assert full.exact and full.value == Fraction(1, 32)
    assert full.value <= d.value


def random_lasso_of_symbols(rng, alphabet, max_prefix=3, max_cycle=3):
    prefix = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, max_prefix)))
    cycle = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, max_cycle)))
    return LassoSchedule(2, 1, prefix, cycle)


def test_lcp_ultrametric_on_random_lassos():
    small = [_g([[1, 2], [1, 2]]), _g([[1], [1, 2]]), _g([[1, 2], [2]])]
    rng = random.Random(7)
    for _ in range(500):
        a, b, c = (random_lasso_of_symbols(rng, small) for _ in range(3))
        dab = lcp_distance(a, b, horizon=64)
        dbc = lcp_distance(b, c, horizon=64)
        dac = lcp_distance(a, c, horizon=64)
        assert all(d.exact for d in (dab, dbc, dac))
        assert dac.value <= max(dab.value, dbc.value)


# -- AMP schedule structure ---------------------------------------------------

def test_amp_schedule_structure_ok():
    s = AmpLassoSchedule(
        2, 0,
        prefix=(AmpStep(1), AmpStep(2)),
        cycle=(AmpStep(1, (1, 2)), AmpStep(2, (1, 2))),
    )
    s.validate_structure()
    assert s.faulty_hint == frozenset()
    text = s.dumps()
    assert AmpLassoSchedule.loads(text).dumps() == text


def test_amp_schedule_unsent_reference_rejected():
    s = AmpLassoSchedule(2, 0, prefix=(AmpStep(1, (2,)),), cycle=(AmpStep(1), AmpStep(2)))
    with pytest.raises(ScheduleError):
        s.validate_structure()


def test_amp_schedule_draining_cycle_rejected():
    # cycle delivers two from p1 but p1 sends only once per iteration
    s = AmpLassoSchedule(
        2, 0,
        prefix=(AmpStep(1), AmpStep(1), AmpStep(2)),
        cycle=(AmpStep(2, (1, 1)), AmpStep(1, (2,))),
    )
    with pytest.raises(ScheduleError):
        s.validate_structure()


def test_amp_schedule_faulty_bound():
    s = AmpLassoSchedule(3, 0, prefix=(AmpStep(1), AmpStep(2), AmpStep(3)),
                         cycle=(AmpStep(1),))
    with pytest.raises(ScheduleError):
        s.validate_structure()
    assert s.faulty_hint == frozenset({2, 3})
