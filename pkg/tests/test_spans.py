import pytest

from mcasvis import harness as H
from mcasvis import lines as L
from mcasvis import spans as S
from mcasvis.core_mcas import McasMemory
from mcasvis.core_rdcss import RdcssMemory
from mcasvis.words import CPTR, DPTR, is_mdesc

from conftest import events_by_proc, mcas_cfg


def _lines(st, b):
    return tuple(st.reps[k].line for k in b)


def test_rdcss_success_denotation():
    m = RdcssMemory()
    c, d = m.ralloc(0, CPTR), m.ralloc(5, DPTR)
    m.rdcss(c, d, 0, 5, 7)
    h = m.history()
    st = S.extract(h)
    x = events_by_proc(h, "rdcss")[0]
    spans, out = st.denote(x.id)
    assert out == 5
    shapes = sorted(_lines(st, b) for b in spans)
    assert shapes == sorted([(L.LOOP_CAS, L.COMPLETE_SUCCESS),
                             (L.COMPLETE_READ_PT1, L.COMPLETE_READ_PT1)])


def test_rdcss_failing_at_data_denotation():
    m = RdcssMemory()
    c, d = m.ralloc(0, CPTR), m.ralloc(9, DPTR)
    m.rdcss(c, d, 0, 5, 7)
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "rdcss")[0].id)
    assert out == 9
    assert [_lines(st, b) for b in spans] == [(L.LOOP_CAS, L.LOOP_CAS)]


def test_rdcss_control_mismatch_uses_undo_pair():
    m = RdcssMemory()
    c, d = m.ralloc(1, CPTR), m.ralloc(5, DPTR)
    m.rdcss(c, d, 0, 5, 7)
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "rdcss")[0].id)
    assert out == 5
    assert (L.LOOP_CAS, L.COMPLETE_UNDO) in {_lines(st, b) for b in spans}


def test_rread_plain_value_is_one_collapsed_span():
    m = RdcssMemory()
    d = m.ralloc(4, DPTR)
    m.rread(d)
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "rread")[0].id)
    assert out == 4 and len(spans) == 1
    (b,) = spans
    assert b[0] == b[1]


def test_mcas_two_entry_success_shares_resolver():
    m = McasMemory()
    p, q = m.malloc(1), m.malloc(2)
    m.mcas([(p, 1, 10), (q, 2, 20)])
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "mcas")[0].id)
    assert out is True and len(spans) == 2
    assert len({b[1] for b in spans}) == 1
    for b in spans:
        assert _lines(st, b) == (L.INVOKE_RDCSS, L.HELP_RESOLVE)


def test_mcas_failing_at_second_entry():
    m = McasMemory()
    p, q = m.malloc(1), m.malloc(3)
    m.mcas([(p, 1, 10), (q, 2, 20)])
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "mcas")[0].id)
    assert out is False
    assert sorted(b[0] == b[1] for b in spans) == [False, True]


def test_helped_mcas_denotation_built_from_helper_reps():
    cfg = mcas_cfg([[("mcas", ((0, 1, 10),))], [("mread", 0)]], [1], granularity="rep")
    # thread 1 installs its descriptor and stalls; thread 2 resolves it
    h = H.run_schedule(cfg, [0, 0, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0])
    st = S.extract(h)
    x = events_by_proc(h, "mcas")[0]
    spans, out = st.denote(x.id)
    assert out is True and len(spans) == 1
    (b,) = spans
    assert st.reps[b[0]].thread == x.thread and st.reps[b[1]].thread != x.thread


@pytest.mark.parametrize("schedule,status,output", [([0, 0, 1, 1], "undec", 1),
                                                    ([0, 0, 1, 0, 1], "succ", 10)])
def test_opportunistic_mread_spans(schedule, status, output):
    cfg = mcas_cfg([[("mcas", ((0, 1, 10),))], [("mread", 0)]], [1], "opportunistic",
                   granularity="rep")
    h = H.run_schedule(cfg, schedule)
    st = S.extract(h)
    assert st.kind == S.MCAS_OPP
    r = events_by_proc(h, "mread")[0]
    spans, out = st.denote(r.id)
    assert out == output
    (b,) = spans
    assert _lines(st, b) == (L.MREAD, L.MREAD_STATUS)
    assert any(b in s for s in st.ospans.values())


def test_opportunistic_plain_read_is_descriptor_span():
    m = McasMemory("opportunistic")
    p = m.malloc(3)
    m.mread(p)
    h = m.history()
    st = S.extract(h)
    spans, out = st.denote(events_by_proc(h, "mread")[0].id)
    assert out == 3
    (b,) = spans
    assert b in st.dspans[p]


def test_structure_mismatch():
    m = McasMemory("opportunistic")
    m.malloc(1)
    h = m.history()
    with pytest.raises(S.StructureMismatch):
        S.extract_mcas_helping(h)
    with pytest.raises(S.StructureMismatch):
        S.extract_rdcss(h)
    r = RdcssMemory()
    r.ralloc(0, DPTR)
    with pytest.raises(S.StructureMismatch):
        S.extract_mcas_opportunistic(r.history())


def test_unterminated_event_without_descriptor_has_empty_denotation():
    m = McasMemory()
    p = m.malloc(1)
    m.recorder.begin_event(7, "mcas", ((p, 1, 2),))
    h = m.history()
    st = S.extract(h)
    assert st.denote(h.events[-1].id) == S.EMPTY
    assert st.denote(h.events[-1].id) == st.denote(h.events[-1].id)


def test_full_spans_start_with_own_descriptor_write():
    for seed in range(20):
        h = H.run(H.WorkloadConfig(seed=seed, threads=3))
        st = S.extract(h)
        owners = st.owners()
        for p, spans in st.dspans.items():
            for b in spans:
                if b[0] != b[1]:
                    r = st.reps[b[0]]
                    assert r.line == L.INVOKE_RDCSS and is_mdesc(r.operands[4])
                    for x in owners.get(b, ()):
                        alloc = [k for k in range(len(st.reps))
                                 if st.reps[k].line == L.ALLOC_MDESC and st.reps[k].event == x]
                        assert st.reps[alloc[0]].output.slot == r.operands[4].slot


def test_extraction_is_deterministic_and_dump_is_stable():
    h = H.run(H.WorkloadConfig(seed=5, threads=3))
    a, b = S.extract(h), S.extract(h)
    assert a.denot == b.denot and a.dspans == b.dspans and a.wspans == b.wspans
    assert a.dump() == b.dump()
    first = a.dump().splitlines()[0].split("\t")
    assert len(first) == 6
