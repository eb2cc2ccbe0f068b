import io
import threading

import pytest
from hypothesis import given, settings, strategies as st

from mcasvis import harness as H
from mcasvis.history import (Clock, History, HistoryParseError, Recorder, dumps, export, load,
                             loads)
from mcasvis.words import UsageError


def test_first_event_id_and_monotone_starts():
    rec = Recorder()
    a = rec.begin_event(1, "mread", ())
    b = rec.begin_event(1, "mread", ())
    h = rec.history()
    assert a == 0 and b == 1
    assert h.events[0].start < h.events[1].start


def test_concurrent_begins_get_distinct_ids():
    rec = Recorder()
    ids = []

    def body():
        for _ in range(200):
            ids.append(rec.begin_event(1, "mread", ()))

    ts = [threading.Thread(target=body) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert len(set(ids)) == 800


def test_end_event():
    rec = Recorder()
    eid = rec.begin_event(1, "mwrite", ())
    rec.record_rep(1, eid, "L-mwrite-attempt", (), 0, "write")
    rec.end_event(eid, 3)
    later = rec.begin_event(1, "mread", ())
    h = rec.history()
    e = h.events[0]
    assert e.start < h.reps[0].ticket < e.end < h.events[later].start
    with pytest.raises(UsageError):
        rec.end_event(eid, 3)


def test_unclosed_event_serializes_without_output():
    rec = Recorder()
    rec.begin_event(1, "mread", ())
    h = loads(dumps(rec.history()))
    assert h.events[0].output is None and not h.events[0].terminated


def test_rep_tickets_increase_per_thread():
    rec = Recorder()
    eid = rec.begin_event(1, "mread", ())
    t1 = rec.record_rep(1, eid, "L-mread-access", (), 0, "read")
    t2 = rec.record_rep(1, eid, "L-mread-access", (), 0, "read")
    assert t1 < t2


def test_exportable_rep_carries_inner_ticket():
    h = H.run(H.WorkloadConfig(seed=1))
    prim = {(r.ticket, r.thread) for r in h.reps if r.layer == "primitive"}
    for r in h.reps:
        if r.layer == "rdcss_exportable":
            assert (r.ticket, r.thread) in prim or r.line == "L-invoke-rdcss"
            assert r.start < r.end


def test_empty_history_round_trips():
    assert loads(dumps(History())) == History()


def test_large_history_round_trips_bit_exactly():
    cfg = H.WorkloadConfig(mode="sim-random", threads=6, ops=120, pointers=4, seed=7)
    h = H.run(cfg)
    assert len(h.reps) >= 10_000
    text = dumps(h)
    assert loads(text) == h and dumps(loads(text)) == text


def test_stream_export_and_load():
    h = H.run(H.WorkloadConfig(seed=3))
    buf = io.StringIO()
    export(h, buf)
    buf.seek(0)
    assert load(buf) == h


def test_truncated_file_is_parse_error():
    text = dumps(H.run(H.WorkloadConfig(seed=2)))
    lines = text.splitlines()
    with pytest.raises(HistoryParseError):
        loads("\n".join(lines[:-1]) + "\n")
    with pytest.raises(HistoryParseError):
        loads("\n".join(lines[:len(lines) // 2]))


@pytest.mark.parametrize("bad", [
    "garbage\n",
    "EVT\t0\tT1\tmread\n",
    "EVT\tx\tT1\tmread\td0\t1\t2\t3\nEND\t1\t0\n",
    "EVT\t0\tT1\tfly\t-\t-\t2\t-\nEND\t1\t0\n",
])
def test_malformed_records(bad):
    with pytest.raises(HistoryParseError) as err:
        loads(bad)
    assert "line" in str(err.value)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["mcas", "rdcss"]),
       st.sampled_from(["helping", "opportunistic"]), st.booleans())
def test_round_trip_generated_histories(seed, layer, strategy, crash):
    cfg = H.WorkloadConfig(seed=seed, layer=layer, strategy=strategy, threads=3, crash=crash)
    h = H.run(cfg)
    assert loads(dumps(h)) == h


def test_clock_is_monotone():
    c = Clock()
    assert [c.tick() for _ in range(3)] == [1, 2, 3]
