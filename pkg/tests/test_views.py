from hoamp.views import (
    AnonViewBuilder,
    EventLog,
    View,
    anon_view_sequence,
    build_anon_views,
)


def small_log():
    log = EventLog()
    a = log.append("input", 1, 0, 5)
    b = log.append("input", 2, 0, 9)
    s1 = log.append("send", 1, 1, "m1", (a,))
    s2 = log.append("send", 2, 1, "m2", (b,))
    r1 = log.append("recv", 1, 1, None, (s1, s2))
    return log, a, b, s1, s2, r1


def test_closure_and_containment():
    log, a, b, s1, s2, r1 = small_log()
    v = View(log, r1)
    assert log.closure(r1) == {a, b, s1, s2, r1}
    assert v.contains(View(log, a))
    assert v.contains(View(log, s2))
    assert not View(log, s1).contains(View(log, b))


def test_view_grows_with_process_history():
    log, a, b, s1, s2, r1 = small_log()
    assert View(log, r1).contains(View(log, s1))  # step k includes step k-1


def test_serialization_roundtrip_bit_exact():
    log, *_rest, r1 = small_log()
    v = View(log, r1)
    text = v.canonical()
    again = View.deserialize(text)
    assert again.canonical() == text
    assert again == v


def test_cross_log_equality():
    log1, *_r, r1 = small_log()
    log2, *_r2, r2 = small_log()
    assert View(log1, r1) == View(log2, r2)
    assert hash(View(log1, r1)) == hash(View(log2, r2))


def test_anon_views_hash_cons():
    b = AnonViewBuilder()
    x = b.initial(4)
    y = b.initial(4)
    assert x is y
    z = b.extend(x, [x, y])
    w = b.extend(x, [y, x])
    assert z is w  # multiset order is canonical


def test_anon_views_symmetry_under_name_swap():
    # p1 and p2 never hear each other but both hear p3; swapping their
    # inputs swaps their anonymous view sequences
    in_sets = [[frozenset({1, 3}), frozenset({2, 3}), frozenset({3})]] * 3
    seq_a1 = anon_view_sequence([10, 20, 7], in_sets, 1)
    seq_a2 = anon_view_sequence([10, 20, 7], in_sets, 2)
    seq_b1 = anon_view_sequence([20, 10, 7], in_sets, 1)
    seq_b2 = anon_view_sequence([20, 10, 7], in_sets, 2)
    assert [v.key for v in seq_a1] == [v.key for v in seq_b2]
    assert [v.key for v in seq_a2] == [v.key for v in seq_b1]


def test_anon_view_collects_names():
    in_sets = [[frozenset({1, 2}), frozenset({2}), frozenset({2, 3})]] * 2
    views = build_anon_views([5, 9, 2], in_sets)
    assert views[(1, 1)].names == frozenset({5, 9})
    assert views[(1, 2)].names == frozenset({5, 9})
    assert views[(3, 1)].names == frozenset({9, 2})
    assert views[(2, 2)].own_input == 9
