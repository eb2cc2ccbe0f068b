import pytest

from mcasvis import axioms as A
from mcasvis import harness as H
from mcasvis import lines as L
from mcasvis import spans as S
from mcasvis import visibility as V
from mcasvis.core_mcas import McasMemory

from conftest import events_by_proc, mcas_cfg


def _sequential():
    m = McasMemory()
    p = m.malloc(1)
    m.mread(p)
    m.mcas([(p, 1, 2)])
    m.mread(p)
    h = m.history()
    return h, S.extract(h), p


def _violated(st, h):
    """Axiom id -> witnesses, for every violated axiom."""
    rep = A.check(st, h)
    return {a: rep.witnesses[a] for a in rep.violations()}


def test_single_threaded_structure_passes():
    h, st, _ = _sequential()
    rep = A.check(st, h)
    assert rep.passed and set(rep.counts) == set(A.SPAN_AXIOMS)


def test_overlapping_spans_violate_disjointness():
    h, st, p = _sequential()
    spans = sorted(st.dspans[p])
    a, c = spans[0], spans[-1]
    wide = (a[0], c[0] + 1) if c[0] + 1 < len(st.reps) else (a[0], c[0])
    st.dspans[p].add(wide)
    v = _violated(st, h)
    assert "disjointness" in v
    assert any(st.render(wide) in w for w in v["disjointness"])


def test_span_ending_before_it_starts():
    h, st, p = _sequential()
    k = max(b[1] for b in st.dspans[p])
    st.dspans[p].add((k, k - 1))
    assert "write-precedes-resolution" in _violated(st, h)


def test_span_in_two_denotations():
    h, st, p = _sequential()
    reads = events_by_proc(h, "mread")
    spans, out = st.denot[reads[0].id]
    st.denot[reads[1].id] = (spans, out)
    assert "injective-denotations" in _violated(st, h)


def test_missing_denotation_breaks_adequacy():
    h, st, _ = _sequential()
    x = events_by_proc(h, "mcas")[0].id
    st.denot[x] = S.EMPTY
    assert "adequacy" in _violated(st, h)


def test_second_alloc_span():
    h, st, p = _sequential()
    b = next(iter(st.aspans[p]))
    st.aspans[p].add((b[0] + 1, b[0] + 1))
    assert "alloc-spans-unique" in _violated(st, h)


def test_span_on_two_pointers():
    m = McasMemory()
    p, q = m.malloc(1), m.malloc(2)
    m.mread(p)
    h = m.history()
    st = S.extract(h)
    b = next(b for b in st.dspans[p] if b not in st.aspans[p])
    st.dspans[q].add(b)
    assert "one-pointer-per-span" in _violated(st, h)


def test_wrong_output_breaks_postcondition():
    h, st, _ = _sequential()
    x = events_by_proc(h, "mread")[1].id
    spans, _ = st.denot[x]
    st.denot[x] = (spans, 77)
    v = _violated(st, h)
    assert "postcondition" in v and "adequacy" in v


def _opportunistic():
    cfg = mcas_cfg([[("mcas", ((0, 1, 10),))], [("mread", 0)]], [1], "opportunistic",
                   granularity="rep")
    h = H.run_schedule(cfg, [0, 0, 1, 1])
    return h, S.extract(h)


def test_opportunistic_run_passes():
    h, st = _opportunistic()
    rep = A.check(st, h)
    assert rep.passed and set(rep.counts) == set(A.OPPORTUNISM_AXIOMS)


def test_mixed_kinds_in_one_denotation():
    h, st = _opportunistic()
    r = events_by_proc(h, "mread")[0].id
    spans, out = st.denot[r]
    p = next(iter(st.ospans))
    d = next(b for b in st.dspans[p] if b[0] == b[1])
    st.denot[r] = (spans | {d}, out)
    v = _violated(st, h)
    assert "one-kind-per-denotation" in v


def test_span_of_both_kinds():
    h, st = _opportunistic()
    p = next(iter(st.ospans))
    b = next(iter(st.ospans[p]))
    st.dspans[p].add(b)
    v = _violated(st, h)
    assert "kinds-disjoint" in v and "kinds-do-not-share-first" in v


def test_two_ospans_in_one_denotation():
    h, st = _opportunistic()
    r = events_by_proc(h, "mread")[0].id
    spans, out = st.denot[r]
    p = next(iter(st.ospans))
    b = next(iter(st.ospans[p]))
    extra = (b[0], b[1] + 1)
    st.ospans[p].add(extra)
    st.denot[r] = (spans | {extra}, out)
    assert "opportunism-unique" in _violated(st, h)


def test_opportunistic_read_ending_after_a_span_of_the_observed_event():
    h, st = _opportunistic()
    p = next(iter(st.ospans))
    (b,) = st.ospans[p]
    x = events_by_proc(h, "mcas")[0].id
    spans, out = st.denot[x]
    # an extra span of x that ends before the o-span does
    early = next(k for k in range(b[1]) if st.reps[k].line == L.HELP_PHASE1
                 and st.reps[k].event == x)
    st.denot[x] = (spans | {(early, early)}, out)
    assert "opportunism" in _violated(st, h)


def test_kind_mismatch_is_rejected():
    h, st, _ = _sequential()
    with pytest.raises(ValueError):
        A.check_opportunism_axioms(st, h)
    oh, ost = _opportunistic()
    with pytest.raises(ValueError):
        A.check_span_axioms(ost, oh)


def test_report_is_deterministic():
    h = H.run(H.WorkloadConfig(seed=11, threads=3))
    st = S.extract(h)
    rel = V.build_visibility(st, h)
    assert A.check(st, h, rel).render() == A.check(S.extract(h), h).render()


def test_witness_list_is_capped():
    h, st, p = _sequential()
    n = len(st.reps)
    backwards = {(i, j) for i in range(n) for j in range(i)}
    assert len(backwards) > 32
    st.dspans[p] |= backwards
    rep = A.check(st, h)
    assert rep.counts["write-precedes-resolution"] == len(backwards)
    assert len(rep.witnesses["write-precedes-resolution"]) == 32
