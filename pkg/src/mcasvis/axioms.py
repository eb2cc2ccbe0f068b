"""Span axioms and opportunism axioms checked on a concrete span structure.

Every quantifier is enumerated over the finite sets of the structure. The
postcondition and writer-membership axioms evaluate Q, W_p and A_p through
:mod:`mcasvis.visibility`, so they need the visibility relations too.
"""
from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict

from . import visibility as V
from .history import History
from .report import AxiomReport
from .spans import SpanStructure
from .words import same

SPAN_AXIOMS = [
    "disjointness", "bunching", "adequacy", "write-precedes-resolution", "injective-denotations",
    "writer-spans-owned", "postcondition", "writers-have-writer-spans", "time-containment",
    "alloc-spans-unique", "spans-have-alloc", "allocs-have-alloc-spans", "one-pointer-per-span",
]
OPPORTUNISM_AXIOMS = SPAN_AXIOMS + [
    "opportunism", "kinds-disjoint", "kinds-do-not-share-first", "one-kind-per-denotation",
    "opportunism-unique",
]


def _ptr_key(p):
    return (p.kind, p.slot)


def check_span_axioms(st: SpanStructure, h: History, rel: V.VisRelations | None = None) -> AxiomReport:
    if st.opportunistic:
        raise ValueError("use check_opportunism_axioms for opportunistic structures")
    return _check(st, h, rel, AxiomReport(st.kind, SPAN_AXIOMS))


def check_opportunism_axioms(st: SpanStructure, h: History,
                             rel: V.VisRelations | None = None) -> AxiomReport:
    if not st.opportunistic:
        raise ValueError("opportunism axioms need an opportunistic structure")
    return _check(st, h, rel, AxiomReport(st.kind, OPPORTUNISM_AXIOMS))


def check(st: SpanStructure, h: History, rel: V.VisRelations | None = None) -> AxiomReport:
    if st.opportunistic:
        return check_opportunism_axioms(st, h, rel)
    return check_span_axioms(st, h, rel)


def _check(st, h, rel, rep):
    if rel is None:
        rel = V.build_visibility(st, h)
    R = st.render
    events = {e.id: e for e in h.events}
    owners = st.owners()
    opp = st.opportunistic
    ptrs = st.pointers()

    # disjointness over descriptor spans, exact pair count by sweeping firsts
    for p in ptrs:
        spans = sorted(st.dspans.get(p, ()))
        firsts = [b[0] for b in spans]
        for i, b in enumerate(spans):
            for c in spans[i + 1:bisect_right(firsts, b[1])]:
                rep.fail("disjointness", f"{R(b)} and {R(c)} overlap on {p}")

    for b in sorted(st.all_spans()):
        if b[0] > b[1]:
            rep.fail("write-precedes-resolution", f"{R(b)} ends before it starts")

    for b, xs in sorted(owners.items()):
        if len(xs) > 1:
            rep.fail("injective-denotations",
                     f"{R(b)} in denotations of " + ", ".join(f"E{x}" for x in xs))

    for p in ptrs:
        for b in sorted(st.wspans.get(p, ())):
            if b not in owners:
                rep.fail("writer-spans-owned", f"writer span {R(b)} on {p} belongs to no event")

    for p in ptrs:
        al = sorted(st.aspans.get(p, ()))
        if len(al) > 1:
            rep.fail("alloc-spans-unique", f"{p} has alloc spans " + ", ".join(R(b) for b in al))
        allspans = set(st.dspans.get(p, ())) | set(st.ospans.get(p, ()))
        for b in sorted(allspans):
            if not any(c == b or c[1] < b[0] for c in al):
                rep.fail("spans-have-alloc", f"{R(b)} on {p} has no earlier alloc span")

    for b, ps in sorted(st.span_pointers().items()):
        if len(ps) > 1:
            rep.fail("one-pointer-per-span",
                     f"{R(b)} accesses " + ", ".join(str(p) for p in sorted(ps, key=_ptr_key)))

    # suffix minimum of rep end times, for the time-containment witness search
    n = len(st.reps)
    suffix = [0] * (n + 1)
    suffix[n] = None
    for k in range(n - 1, -1, -1):
        e = st.reps[k].end
        nxt = suffix[k + 1]
        suffix[k] = e if nxt is None or e < nxt else nxt

    wsets = {p: set(st.wspans.get(p, ())) for p in ptrs}
    asets = {p: set(st.aspans.get(p, ())) for p in ptrs}
    span_ptr = st.span_pointers()
    dset = set().union(*st.dspans.values()) if st.dspans else set()
    oset = set().union(*st.ospans.values()) if st.ospans else set()
    for x in sorted(st.denot):
        spans, out = st.denot[x]
        ev = events[x]
        if ev.terminated and (not spans or out is None or not same(out, ev.output)):
            rep.fail("adequacy", f"E{x} ({ev.proc}) terminated with output {ev.output!r} but "
                                 f"denotation ({len(spans)} spans, {out!r})")
        if not spans:
            continue
        ordered = sorted(spans)
        for b in ordered:
            for c in ordered:
                if b[0] > c[1]:
                    rep.fail("bunching", f"E{x}: {R(b)} starts after {R(c)} ends")
        if out is None or not V.post(rel, x, out):
            rep.fail("postcondition", f"E{x} ({ev.proc}) denotation output {out!r} fails Q")
        cand = set(V.touched_pointers(ev))
        for b in spans:
            cand |= span_ptr.get(b, set())
        for p in sorted(cand, key=_ptr_key):
            has_w = any(b in wsets.get(p, ()) for b in spans)
            if V.in_writes(rel, x, p) != has_w:
                rep.fail("writers-have-writer-spans",
                         f"E{x} ({ev.proc}) at {p}: W_p={not has_w}, writer span={has_w}")
            has_a = any(b in asets.get(p, ()) for b in spans)
            if V.in_allocs(rel, x, p) != has_a:
                rep.fail("allocs-have-alloc-spans",
                         f"E{x} ({ev.proc}) at {p}: A_p={not has_a}, alloc span={has_a}")
        for b in ordered:
            if ev.start > st.reps[b[0]].start:
                rep.fail("time-containment", f"E{x} starts after first rep of {R(b)}")
            if ev.terminated and (suffix[b[1]] is None or suffix[b[1]] > ev.end):
                rep.fail("time-containment", f"E{x} returns before any rep after {R(b)} ends")
        if opp:
            if not (spans <= dset or spans <= oset):
                rep.fail("one-kind-per-denotation", f"E{x} mixes descriptor and opportunistic spans")
            ospans = sorted(spans & oset)
            if len(ospans) > 1:
                rep.fail("opportunism-unique",
                         f"E{x} has opportunistic spans " + ", ".join(R(b) for b in ospans))

    if opp:
        for p in ptrs:
            d, o = st.dspans.get(p, set()), st.ospans.get(p, set())
            for b in sorted(d & o):
                rep.fail("kinds-disjoint", f"{R(b)} on {p} is both kinds")
            dfirst = defaultdict(list)
            for b in d:
                dfirst[b[0]].append(b)
            for c in sorted(o):
                for b in sorted(dfirst.get(c[0], ())):
                    rep.fail("kinds-do-not-share-first", f"{R(b)} and {R(c)} on {p} share a first rep")
        # O(b, x): b in O_p opportunistically accesses x through c in spans(x) ∩ W^S_p
        wowned = defaultdict(list)  # p -> (x, c)
        for x in sorted(st.denot):
            for c in st.denot[x][0]:
                for p in span_ptr.get(c, ()):
                    if c in wsets.get(p, ()):
                        wowned[p].append((x, c))
        for p in ptrs:
            for b in sorted(st.ospans.get(p, ())):
                hit = sorted({x for x, c in wowned.get(p, ()) if c[0] <= b[1] <= c[1]})
                for x in hit:
                    for c in sorted(st.denot[x][0]):
                        if not b[1] < c[1]:
                            rep.fail("opportunism", f"{R(b)} on {p} accesses E{x} but does not "
                                                    f"end before {R(c)}")
    return rep
