"""Span structures and event denotations extracted from a history.

A span is a pair ``(first, last)`` of ranks into the analyzed layer's rep
events in ticket order; a collapsed span has ``first == last``. Three
structures are supported: RDCSS over primitive reps, helping MCAS and
opportunistic MCAS over the exportable RDCSS calls.
"""
from __future__ import annotations

from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field

from . import lines as L
from .history import ALLOC, EXPORTABLE, PRIMITIVE, READ, WRITE, History
from .words import (DPTR, FAIL, MDESC, SUCC, TT, UNDEC, Desc, Ptr, acquisition_order, is_mdesc,
                    is_rdesc, same)

RDCSS, MCAS, MCAS_OPP = "rdcss", "mcas", "mcas_opportunistic"
KINDS = (RDCSS, MCAS, MCAS_OPP)
EMPTY = (frozenset(), None)


class StructureMismatch(ValueError):
    """The history does not belong to the requested structure."""


@dataclass(frozen=True)
class Span:
    first: int
    last: int
    pointer: Ptr
    kind: str  # "descriptor" or "opportunistic"
    writer: bool
    alloc: bool


@dataclass
class SpanStructure:
    kind: str
    reps: list
    events: dict  # id -> Event
    dspans: dict = field(default_factory=lambda: defaultdict(set))
    ospans: dict = field(default_factory=lambda: defaultdict(set))
    wspans: dict = field(default_factory=lambda: defaultdict(set))
    aspans: dict = field(default_factory=lambda: defaultdict(set))
    denot: dict = field(default_factory=dict)

    @property
    def opportunistic(self) -> bool:
        return self.kind == MCAS_OPP

    def pointers(self) -> list:
        keys = set(self.dspans) | set(self.ospans) | set(self.wspans) | set(self.aspans)
        return sorted(keys, key=lambda p: (p.kind, p.slot))

    def denote(self, eid: int) -> tuple:
        return self.denot.get(eid, EMPTY)

    def spans_of(self, eid: int) -> frozenset:
        return self.denote(eid)[0]

    def all_spans(self) -> set:
        out = set()
        for sets in (self.dspans, self.ospans):
            for s in sets.values():
                out |= s
        return out

    def span_pointers(self) -> dict:
        """Span -> set of pointers whose span sets contain it."""
        out = defaultdict(set)
        for sets in (self.dspans, self.ospans):
            for p, s in sets.items():
                for b in s:
                    out[b].add(p)
        return out

    def owners(self) -> dict:
        """Span -> sorted ids of events whose denotation contains it."""
        out = defaultdict(list)
        for eid in sorted(self.denot):
            for b in self.denot[eid][0]:
                out[b].append(eid)
        return out

    def span_objects(self) -> list:
        out = []
        for sets, kind in ((self.dspans, "descriptor"), (self.ospans, "opportunistic")):
            for p, s in sets.items():
                for b in s:
                    out.append(Span(b[0], b[1], p, kind, b in self.wspans.get(p, ()),
                                    b in self.aspans.get(p, ())))
        out.sort(key=lambda s: (s.first, s.last, s.pointer.kind, s.pointer.slot, s.kind))
        return out

    def ticket(self, rank: int) -> int:
        return self.reps[rank].ticket

    def render(self, b) -> str:
        f, l = b
        if f == l:
            return f"({self.ticket(f)})"
        return f"({self.ticket(f)},{self.ticket(l)})"

    def dump(self) -> str:
        """One line per span: pointer, kind, first/last tickets, flags, owners."""
        owners = self.owners()
        rows = []
        for s in self.span_objects():
            flags = ("W" if s.writer else "-") + ("A" if s.alloc else "-")
            own = ",".join(f"E{e}" for e in owners.get((s.first, s.last), ())) or "-"
            rows.append(f"{s.pointer}\t{s.kind}\t{self.ticket(s.first)}\t{self.ticket(s.last)}"
                        f"\t{flags}\t{own}")
        return "\n".join(rows) + ("\n" if rows else "")


# ---------------------------------------------------------------- helpers

def rep_pointer(r):
    """The pointer a rep event accesses, or None."""
    if r.effect == ALLOC:
        out = r.output
        if type(out) is Desc:
            return Ptr(DPTR, out.slot)
        return out if type(out) is Ptr else None
    if r.layer == EXPORTABLE and r.line == L.INVOKE_RDCSS:
        return r.operands[1]
    if r.operands and type(r.operands[0]) is Ptr:
        return r.operands[0]
    return None


class _Index:
    """Rank-level lookups shared by the extractors."""

    def __init__(self, reps):
        self.reps = reps
        self.writes = defaultdict(list)   # pointer -> ranks of writing/allocating reps
        self.reads = defaultdict(list)    # thread -> ranks of reads
        self.by_event = defaultdict(list)
        self.by_line = defaultdict(list)
        for k, r in enumerate(reps):
            if r.effect in (WRITE, ALLOC):
                p = rep_pointer(r)
                if p is not None:
                    self.writes[p].append(k)
            if r.effect == READ:
                self.reads[r.thread].append(k)
            self.by_event[r.event].append(k)
            self.by_line[r.line].append(k)

    def next_write(self, p, k):
        w = self.writes.get(p, ())
        i = bisect_left(w, k + 1)
        return w[i] if i < len(w) else None

    def writes_between(self, p, b, c) -> bool:
        w = self.writes.get(p, ())
        i = bisect_left(w, b + 1)
        return i < len(w) and w[i] < c

    def last_read(self, thread, k):
        rs = self.reads.get(thread, ())
        i = bisect_left(rs, k)
        return rs[i - 1] if i else None

    def own(self, ev, line):
        """Ranks at ``line`` executed by the invoking thread within ``ev``."""
        return [k for k in self.by_event.get(ev.id, ())
                if self.reps[k].line == line and self.reps[k].thread == ev.thread]


def _layer_reps(h: History, layer: str) -> list:
    reps = [r for r in h.reps if r.layer == layer]
    reps.sort(key=lambda r: r.key)
    return reps


def _add(sets, p, b):
    sets[p].add(b)


# ---------------------------------------------------------------- RDCSS

def extract_rdcss(h: History) -> SpanStructure:
    if h.layer != "rdcss" or any(r.layer == EXPORTABLE or r.line in L.MCAS_LINES for r in h.reps):
        raise StructureMismatch("not an RDCSS-level history")
    for e in h.events:
        if e.proc in ("mcas", "mread", "mwrite", "malloc"):
            raise StructureMismatch(f"MCAS event E{e.id} in an RDCSS history")
    reps = _layer_reps(h, PRIMITIVE)
    st = SpanStructure(RDCSS, reps, {e.id: e for e in h.events})
    ix = _Index(reps)
    S, W, A = st.dspans, st.wspans, st.aspans
    pair_of = {}  # rank of descriptor-writing CAS -> span
    for k, r in enumerate(reps):
        line, p = r.line, rep_pointer(r)
        if line == L.LOOP_CAS:
            if is_rdesc(r.output):
                continue
            if r.effect != WRITE:
                _add(S, p, (k, k))
                continue
            n = r.operands[2]
            if not is_rdesc(n):
                continue
            c = ix.next_write(p, k)
            if c is None:
                continue
            rc = reps[c]
            if not same(rc.operands[1], n):
                continue
            if rc.line == L.COMPLETE_SUCCESS:
                _add(S, p, (k, c))
                _add(W, p, (k, c))
                pair_of[k] = (k, c)
            elif rc.line == L.COMPLETE_UNDO and same(rc.operands[2], r.operands[1]):
                _add(S, p, (k, c))
                pair_of[k] = (k, c)
        elif line in (L.COMPLETE_READ_PT1, L.RREAD_C, L.RCAS_C, L.RWRITE_C):
            _add(S, p, (k, k))
        elif line in (L.RREAD, L.RCAS):
            if not is_rdesc(r.output):
                _add(S, p, (k, k))
        elif line == L.RWRITE_CAS:
            if r.effect == WRITE and not is_rdesc(r.output):
                _add(S, p, (k, k))
        elif line in (L.RALLOC_C, L.RALLOC_D):
            if type(r.output) is Ptr and r.output.kind == (DPTR if line == L.RALLOC_D else "cptr"):
                _add(S, p, (k, k))
                _add(A, p, (k, k))
        if line in (L.RCAS, L.RWRITE_CAS, L.RCAS_C, L.RWRITE_C, L.RALLOC_C, L.RALLOC_D):
            if r.effect in (WRITE, ALLOC) and (k, k) in S.get(p, ()):
                _add(W, p, (k, k))

    loop_by_desc = defaultdict(list)
    complete_by_desc = defaultdict(list)
    for k in ix.by_line.get(L.LOOP_CAS, ()):
        if is_rdesc(reps[k].operands[2]):
            loop_by_desc[reps[k].operands[2]].append(k)
    for line in (L.COMPLETE_SUCCESS, L.COMPLETE_UNDO):
        for k in ix.by_line.get(line, ()):
            complete_by_desc[reps[k].operands[1]].append(k)

    for ev in h.events:
        st.denot[ev.id] = _denote_rdcss(ev, st, ix, loop_by_desc, complete_by_desc)
    return st


def _denote_rdcss(ev, st, ix, loop_by_desc, complete_by_desc):
    reps, S, W = st.reps, st.dspans, st.wspans
    proc, inp = ev.proc, ev.input
    if proc == "rdcss":
        pt1, pt2, exp1, exp2, new2 = inp
        for i in ix.own(ev, L.ALLOC_RDESC):
            d = reps[i].output
            for c in loop_by_desc.get(d, ()):
                rc = reps[c]
                if not (same(rc.operands[0], pt2) and same(rc.operands[1], exp2)):
                    continue
                if not same(rc.output, exp2):
                    if (c, c) in S.get(pt2, ()):
                        return frozenset({(c, c)}), rc.output
                    continue
                for c2 in complete_by_desc.get(d, ()):
                    r2 = reps[c2]
                    if r2.effect != WRITE or not same(r2.operands[0], pt2):
                        continue
                    b = (c, c2)
                    if r2.line == L.COMPLETE_SUCCESS:
                        if not same(r2.operands[2], new2) or b not in W.get(pt2, ()):
                            continue
                    elif not same(r2.operands[2], exp2) or b not in S.get(pt2, ()):
                        continue
                    rd = ix.last_read(r2.thread, c2)
                    if rd is None or reps[rd].line != L.COMPLETE_READ_PT1:
                        continue
                    if (rd, rd) in S.get(pt1, ()):
                        return frozenset({(rd, rd), b}), exp2
        return EMPTY
    if proc in ("rread", "rread_c"):
        p = inp[0]
        for k in ix.own(ev, L.RREAD if proc == "rread" else L.RREAD_C):
            if (k, k) in S.get(p, ()) and same(reps[k].operands[0], p):
                return frozenset({(k, k)}), reps[k].output
        return EMPTY
    if proc in ("rcas", "rcas_c"):
        p, e, n = inp
        for k in ix.own(ev, L.RCAS if proc == "rcas" else L.RCAS_C):
            ops = reps[k].operands
            if (k, k) in S.get(p, ()) and same(ops[1], e) and same(ops[2], n):
                return frozenset({(k, k)}), reps[k].output
        return EMPTY
    if proc == "rwrite":
        p, v = inp
        for k in ix.own(ev, L.RWRITE_CAS):
            if (k, k) not in W.get(p, ()):
                continue
            rd = ix.last_read(ev.thread, k)
            if rd is None or reps[rd].line != L.RWRITE_READ:
                continue
            if same(reps[k].operands[1], reps[rd].output) and same(reps[k].operands[2], v):
                return frozenset({(k, k)}), TT
        return EMPTY
    if proc == "rwrite_c":
        p, v = inp
        for k in ix.own(ev, L.RWRITE_C):
            if (k, k) in W.get(p, ()) and same(reps[k].operands[1], v):
                return frozenset({(k, k)}), TT
        return EMPTY
    if proc == "ralloc":
        v, kind = inp
        if not ev.terminated or ev.output is None:
            return EMPTY
        line = L.RALLOC_C if kind == "cptr" else L.RALLOC_D
        for k in ix.own(ev, line):
            if (k, k) in W.get(ev.output, ()) and same(reps[k].operands[1], v):
                return frozenset({(k, k)}), reps[k].output
        return EMPTY
    return EMPTY


# ---------------------------------------------------------------- MCAS

def extract_mcas_helping(h: History) -> SpanStructure:
    _check_mcas(h, "helping")
    return _extract_mcas(h, MCAS)


def extract_mcas_opportunistic(h: History) -> SpanStructure:
    _check_mcas(h, "opportunistic")
    return _extract_mcas(h, MCAS_OPP)


def _check_mcas(h, strategy):
    if h.layer != "mcas":
        raise StructureMismatch("not an MCAS-level history")
    if h.strategy != strategy:
        raise StructureMismatch(f"history strategy is {h.strategy!r}, expected {strategy!r}")
    if strategy == "helping" and any(r.line in (L.MREAD_DESC, L.MREAD_STATUS) for r in h.reps):
        raise StructureMismatch("opportunistic mread lines in a helping history")
    for e in h.events:
        if e.proc not in ("mcas", "mread", "mwrite", "malloc"):
            raise StructureMismatch(f"RDCSS event E{e.id} in an MCAS history")


def _extract_mcas(h: History, kind: str) -> SpanStructure:
    reps = _layer_reps(h, EXPORTABLE)
    st = SpanStructure(kind, reps, {e.id: e for e in h.events})
    ix = _Index(reps)
    S, O, W, A = st.dspans, st.ospans, st.wspans, st.aspans

    resolves = defaultdict(list)  # status pointer -> successful resolver ranks
    for k in ix.by_line.get(L.HELP_RESOLVE, ()):
        r = reps[k]
        if r.effect == WRITE and same(r.operands[1], UNDEC) and r.operands[2] in (SUCC, FAIL):
            resolves[r.operands[0]].append(k)

    for k, r in enumerate(reps):
        line = r.line
        if line == L.INVOKE_RDCSS:
            s, p, e1, exp, d = r.operands
            if is_mdesc(r.output) or not same(e1, UNDEC):
                continue
            if not same(r.output, exp):
                _add(S, p, (k, k))
                continue
            if not is_mdesc(d):
                continue
            for c in resolves.get(s, ()):
                if c > k and not ix.writes_between(p, k, c):
                    _add(S, p, (k, c))
                    if same(reps[c].operands[2], SUCC):
                        _add(W, p, (k, c))
        elif line == L.MREAD:
            p = r.operands[0]
            if not is_mdesc(r.output):
                _add(S, p, (k, k))
            elif kind == MCAS_OPP:
                ev = st.events.get(r.event)
                if ev is None or ev.proc != "mread" or ev.thread != r.thread:
                    continue
                for c in ix.by_event[r.event]:
                    rc = reps[c]
                    if c > k and rc.line == L.MREAD_STATUS and rc.thread == r.thread:
                        _add(O, p, (k, c))
                        break
        elif line == L.MWRITE_CAS:
            if r.effect == WRITE and not is_mdesc(r.output):
                p = r.operands[0]
                _add(S, p, (k, k))
                _add(W, p, (k, k))
        elif line == L.MALLOC:
            if type(r.output) is Ptr:
                p = r.output
                _add(S, p, (k, k))
                _add(W, p, (k, k))
                _add(A, p, (k, k))

    descs = {}  # mdesc value -> (status pointer, entries)
    for k in ix.by_line.get(L.ALLOC_MDESC, ()):
        r = reps[k]
        if type(r.output) is Ptr:
            descs[Desc(MDESC, r.output.slot)] = (r.operands[1], tuple(r.operands[2:]))
    invokes = defaultdict(list)  # (status, pointer, exp, desc) -> ranks
    for k in ix.by_line.get(L.INVOKE_RDCSS, ()):
        s, p, e1, exp, d = reps[k].operands
        if same(e1, UNDEC):
            invokes[(s, p, exp, d)].append(k)

    for ev in h.events:
        st.denot[ev.id] = _denote_mcas(ev, st, ix, resolves, invokes, descs)
    return st


def _latest_before(ranks, k, pred):
    best = None
    for a in ranks:
        if a < k and pred(a):
            best = a
    return best


def _denote_mcas(ev, st, ix, resolves, invokes, descs):
    reps, S, O, W = st.reps, st.dspans, st.ospans, st.wspans
    proc, inp = ev.proc, ev.input
    if proc == "mcas":
        u = inp
        for ia in ix.own(ev, L.ALLOC_MDESC):
            if tuple(reps[ia].operands[2:]) != u or type(reps[ia].output) is not Ptr:
                continue
            d = Desc(MDESC, reps[ia].output.slot)
            for i_s in ix.own(ev, L.ALLOC_STATUS):
                s = reps[i_s].output
                if not same(reps[ia].operands[1], s):
                    continue
                for r in resolves.get(s, ()):
                    outcome = reps[r].operands[2]

                    def recent_exp(e, r=r):
                        cands = invokes.get((s, e.pt, e.exp, d), ())
                        return _latest_before(cands, r, lambda a, e=e: same(reps[a].output, e.exp))

                    if outcome == SUCC:
                        spans = set()
                        for e in u:
                            a = recent_exp(e)
                            if a is None or (a, r) not in W.get(e.pt, ()):
                                break
                            spans.add((a, r))
                        else:
                            return frozenset(spans), True
                        continue
                    tr = reps[r].thread
                    order = acquisition_order(u)
                    for j, e in enumerate(order):
                        cj = _latest_before(
                            invokes.get((s, e.pt, e.exp, d), ()), r,
                            lambda a, e=e: (reps[a].thread == tr and not same(reps[a].output, e.exp)
                                            and not is_mdesc(reps[a].output)))
                        if cj is None or (cj, cj) not in S.get(e.pt, ()):
                            continue
                        spans = {(cj, cj)}
                        for e2 in order[:j]:
                            a = recent_exp(e2)
                            if a is None or (a, r) not in S.get(e2.pt, ()):
                                break
                            spans.add((a, r))
                        else:
                            return frozenset(spans), False
        return EMPTY
    if proc == "mread":
        p = inp[0]
        own = ix.own(ev, L.MREAD)
        for k in own:
            if (k, k) in S.get(p, ()):
                return frozenset({(k, k)}), reps[k].output
        if st.kind != MCAS_OPP:
            return EMPTY
        for a in own:
            for b in sorted(b for (f, b) in O.get(p, ()) if f == a):
                rd = _latest_before(ix.own(ev, L.MREAD_DESC), b, lambda k: True)
                if rd is None:
                    continue
                info = descs.get(reps[rd].output)
                if info is None or not same(reps[b].operands[0], info[0]):
                    continue
                for e in info[1]:
                    if same(e.pt, p):
                        return frozenset({(a, b)}), e.new if same(reps[b].output, SUCC) else e.exp
        return EMPTY
    if proc == "mwrite":
        p, v = inp
        for k in ix.own(ev, L.MWRITE_CAS):
            if (k, k) not in W.get(p, ()):
                continue
            rd = ix.last_read(ev.thread, k)
            if rd is None or reps[rd].line != L.MWRITE_READ:
                continue
            ops = reps[k].operands
            if same(ops[0], p) and same(ops[1], reps[rd].output) and same(ops[2], v):
                return frozenset({(k, k)}), TT
        return EMPTY
    if proc == "malloc":
        if not ev.terminated or ev.output is None:
            return EMPTY
        for k in ix.own(ev, L.MALLOC):
            if (k, k) in W.get(ev.output, ()) and same(reps[k].operands[1], inp[0]):
                return frozenset({(k, k)}), reps[k].output
        return EMPTY
    return EMPTY


def extract(h: History) -> SpanStructure:
    """Pick the structure from the history's metadata."""
    if h.layer == "rdcss":
        return extract_rdcss(h)
    if h.strategy == "opportunistic":
        return extract_mcas_opportunistic(h)
    return extract_mcas_helping(h)


def denote(st: SpanStructure, eid: int) -> tuple:
    return st.denote(eid)
