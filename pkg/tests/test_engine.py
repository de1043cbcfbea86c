import pytest

from dpsim.engine import (
    ARRIVAL,
    CORE_WAKE,
    TASK_DONE,
    Engine,
    SchedulingInPastError,
)


def collect(engine, sink):
    def handler(kind, payload):
        sink.append((engine.now, kind, payload))

    return handler


def test_events_fire_in_time_order():
    seen = []
    eng = Engine(handler=lambda k, p: seen.append((eng.now, p)))
    eng.schedule(300, ARRIVAL, "c")
    eng.schedule(100, ARRIVAL, "a")
    eng.schedule(200, ARRIVAL, "b")
    eng.run_until(1000)
    assert seen == [(100, "a"), (200, "b"), (300, "c")]


def test_same_timestamp_ties_break_by_insertion_order():
    seen = []
    eng = Engine(handler=lambda k, p: seen.append(p))
    for name in ("first", "second", "third"):
        eng.schedule(50, CORE_WAKE, name)
    eng.run_until(100)
    assert seen == ["first", "second", "third"]


def test_schedule_in_past_rejected():
    eng = Engine(handler=lambda k, p: None)
    eng.schedule(10, ARRIVAL, None)
    eng.run_until(20)
    with pytest.raises(SchedulingInPastError):
        eng.schedule(5, ARRIVAL, None)


def test_schedule_at_now_allowed():
    fired = []
    eng = Engine(handler=lambda k, p: fired.append(p) or (p == "x" and eng.schedule(eng.now, TASK_DONE, "y")))
    eng.schedule(10, TASK_DONE, "x")
    eng.run_until(20)
    assert fired == ["x", "y"]


def test_cancel_prevents_delivery():
    seen = []
    eng = Engine(handler=lambda k, p: seen.append(p))
    h = eng.schedule(10, ARRIVAL, "dead")
    eng.schedule(20, ARRIVAL, "alive")
    assert eng.cancel(h) is True
    eng.run_until(30)
    assert seen == ["alive"]


def test_cancel_after_fire_returns_false():
    eng = Engine(handler=lambda k, p: None)
    h = eng.schedule(10, ARRIVAL, None)
    eng.run_until(20)
    assert eng.cancel(h) is False
    # idempotent
    assert eng.cancel(h) is False


def test_run_until_advances_clock_to_limit():
    eng = Engine(handler=lambda k, p: None)
    eng.schedule(5, ARRIVAL, None)
    eng.run_until(100)
    assert eng.now == 100


def test_events_beyond_limit_stay_pending():
    seen = []
    eng = Engine(handler=lambda k, p: seen.append(p))
    eng.schedule(150, ARRIVAL, "late")
    eng.run_until(100)
    assert seen == []
    assert eng.pending() == 1
