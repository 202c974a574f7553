import random

import pytest

from hoamp.core import AmpLassoSchedule, AmpStep, ScheduleError
from hoamp.amp_engine import (
    amp_to_flp,
    check_amp_fairness,
    flp_adapters,
    flp_to_amp,
    run_amp,
)
from hoamp.generators import make_fair_amp_lasso, round_robin_amp_lasso
from hoamp.protocol import FlpProtocol
from hoamp.tasks import EchoAmpProtocol


def test_round_robin_all_nonfaulty():
    s = round_robin_amp_lasso(3, 1)
    run = run_amp(EchoAmpProtocol(decide_after=3), (7, 8, 9), s, 30)
    assert run.faulty == frozenset()
    assert run.outputs == (7, 8, 9)
    assert check_amp_fairness(s).all_pass


def test_prefix_only_process_is_faulty():
    rng = random.Random(1)
    s = make_fair_amp_lasso(3, 1, rng, faulty=(3,))
    assert s.faulty_hint == frozenset({3})
    run = run_amp(EchoAmpProtocol(decide_after=2), (1, 2, 3), s, 40)
    assert run.faulty == frozenset({3})
    assert check_amp_fairness(s).all_pass


def test_generated_fair_lassos_pass_fairness():
    rng = random.Random(42)
    for k in range(30):
        faulty = (3,) if k % 3 == 0 else ()
        s = make_fair_amp_lasso(3, 1, rng, faulty=faulty)
        assert check_amp_fairness(s).all_pass, f"case {k}"


def test_pending_forever_violates_nonfaulty_liveness():
    # p2 never takes delivery from p1: the channel backlog grows and the
    # early messages are reported undelivered
    s = AmpLassoSchedule(
        2, 0,
        prefix=(AmpStep(1), AmpStep(2)),
        cycle=(AmpStep(1, (1, 2)), AmpStep(2, (2,))),
    )
    report = check_amp_fairness(s)
    assert not report.all_pass
    checks = {e.check for e in report.failures()}
    assert "nonfaulty_liveness_drift" in checks
    assert any(e.check == "nonfaulty_liveness" and "(1, 1)" in e.detail
               for e in report.failures())


def test_quasi_liveness_exempts_last_send():
    # p3 faulty with two sends; everyone gets the first, nobody the second:
    # the undelivered message is p3's final send, which is exempt
    prefix = (
        AmpStep(3), AmpStep(3),
        AmpStep(1), AmpStep(2),
        AmpStep(1, (3,)), AmpStep(2, (3,)),
        AmpStep(1, (1, 2)), AmpStep(2, (1, 2)),
    )
    cycle = (AmpStep(1, (1, 2)), AmpStep(2, (1, 2)))
    s = AmpLassoSchedule(3, 1, prefix, cycle)
    assert check_amp_fairness(s).all_pass


def test_quasi_liveness_violation_concrete():
    # p3 sends twice; p2 receives neither: send #1 is not the last, so its
    # non-delivery is a quasi-liveness violation naming the message
    prefix = (
        AmpStep(3), AmpStep(3),
        AmpStep(1), AmpStep(2),
        AmpStep(1, (3,)), AmpStep(1, (3,)),
        AmpStep(1, (1, 2)), AmpStep(2, (1, 2)),
    )
    cycle = (AmpStep(1, (1, 2)), AmpStep(2, (1, 2)))
    s = AmpLassoSchedule(3, 1, prefix, cycle)
    report = check_amp_fairness(s)
    fails = [e for e in report.failures() if e.check == "faulty_quasi_liveness"]
    assert fails
    assert any("(3, 1)" in e.detail and e.process == 2 for e in fails)
    # the last send (3, 2) is exempt: no failure entry mentions it
    assert not any("(3, 2)" in e.detail for e in fails)


def test_flp_liveness_flag_drops_exemption():
    prefix = (
        AmpStep(3),
        AmpStep(1), AmpStep(2),
        AmpStep(1, (3,)),                        # p2 never gets p3's only send
        AmpStep(1, (1, 2)), AmpStep(2, (1, 2)),
    )
    cycle = (AmpStep(1, (1, 2)), AmpStep(2, (1, 2)))
    s = AmpLassoSchedule(3, 1, prefix, cycle)
    assert check_amp_fairness(s).all_pass
    report = check_amp_fairness(s, flp_liveness=True)
    assert any(e.check == "flp_liveness" for e in report.failures())


def test_run_amp_rejects_unsent_delivery():
    s = AmpLassoSchedule(2, 0, prefix=(AmpStep(1, (2,)),),
                         cycle=(AmpStep(1), AmpStep(2)))
    with pytest.raises(ScheduleError):
        run_amp(EchoAmpProtocol(), (0, 0), s, 5)


def test_run_amp_determinism():
    s = round_robin_amp_lasso(3, 0)
    a = run_amp(EchoAmpProtocol(decide_after=4), (1, 2, 3), s, 24)
    b = run_amp(EchoAmpProtocol(decide_after=4), (1, 2, 3), s, 24)
    assert a.dumps() == b.dumps()


def test_messages_received_at_most_once():
    s = round_robin_amp_lasso(3, 0)
    run = run_amp(EchoAmpProtocol(), (1, 2, 3), s, 30)
    for msg in run.extras["messages"]:
        assert len(msg.delivered) <= 3  # one per recipient at most
        assert len(set(msg.delivered)) == len(msg.delivered)


# -- point-to-point adapters ---------------------------------------------------

class SendToTwo(FlpProtocol):
    """First step sends its input to process 2 only; decides on any receipt."""

    def init(self, pid, input_value):
        return (pid, input_value, False)

    def on_receive(self, state, message):
        pid, x, started = state
        decision = None
        sends = ()
        if not started:
            sends = ((2, ("payload", x)),)
        if message is not None and isinstance(message, tuple) and message[0] == "payload":
            decision = message[1]
        return (pid, x, True), decision, sends


def test_flp_to_amp_targets_single_recipient():
    proto = flp_to_amp(SendToTwo())
    s = round_robin_amp_lasso(3, 0)
    run = run_amp(proto, ("a", "b", "c"), s, 30)
    assert run.decisions.get(2) is not None
    assert run.decisions[2][0] in ("a", "b", "c")
    assert 1 not in run.decisions and 3 not in run.decisions


def test_amp_to_flp_broadcast_becomes_point_to_point():
    inner = EchoAmpProtocol(decide_after=2)
    wrapped = amp_to_flp(inner, 3)
    state = wrapped.init(1, 42)
    _state, _dec, sends = wrapped.on_receive(state, None)
    assert [dest for dest, _ in sends] == [1, 2, 3]
    assert len({m for _, m in map(tuple, sends)}) == 1


def test_adapter_roundtrip_same_decisions():
    inner = EchoAmpProtocol(decide_after=3)
    roundtripped = flp_to_amp(amp_to_flp(inner, 3))
    s = round_robin_amp_lasso(3, 0)
    direct = run_amp(inner, (4, 5, 6), s, 30)
    via = run_amp(roundtripped, (4, 5, 6), s, 30)
    assert direct.outputs == via.outputs
    assert {p: v for p, (v, _) in direct.decisions.items()} == \
           {p: v for p, (v, _) in via.decisions.items()}


def test_flp_adapters_dispatcher():
    assert flp_adapters("flp_to_amp") is flp_to_amp
    assert flp_adapters("amp_to_flp") is amp_to_flp
