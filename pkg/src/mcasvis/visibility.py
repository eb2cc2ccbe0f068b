"""Visibility relations, their axioms, the committed set, linearization and replay."""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass, field

from . import kernels
from .report import AxiomReport
from .history import History
from .spans import SpanStructure
from .words import DPTR, TT, Ptr, same

MCAS_PROCS = ("mcas", "mread", "mwrite", "malloc")


class LinearizationError(RuntimeError):
    """The order (real time plus visibility) has a cycle."""

    def __init__(self, cycle: list):
        super().__init__("cycle in real-time/visibility order: "
                         + " -> ".join(f"E{e}" for e in cycle))
        self.cycle = cycle


@dataclass
class VisRelations:
    history: History
    obs: dict = field(default_factory=lambda: defaultdict(set))  # p -> {(w, r)}
    sep: dict = field(default_factory=lambda: defaultdict(set))  # p -> {(a, b)}

    def __post_init__(self):
        self.events = {e.id: e for e in self.history.events}
        self._obs_in = None

    @property
    def layer(self) -> str:
        return self.history.layer

    def edges(self) -> set:
        """The general visibility relation as a set of event pairs."""
        out = set()
        for rel in (self.obs, self.sep):
            for s in rel.values():
                out |= s
        return out

    def observers_of(self, p, x) -> set:
        """All z with obs_p(z, x)."""
        if self._obs_in is None:
            idx = defaultdict(set)
            for q, s in self.obs.items():
                for w, r in s:
                    idx[(q, r)].add(w)
            self._obs_in = idx
        return self._obs_in.get((p, x), set())

    def sep_eq(self, p, a, b) -> bool:
        return a == b or (a, b) in self.sep.get(p, ())

    def invalidate(self):
        self._obs_in = None


# ---------------------------------------------------------------- building

def _max_writer(cands):
    """Maximum under span precedence of a list of (first, last) spans, or None.

    ``m`` is the maximum when every other candidate ends before ``m`` starts.
    """
    if not cands:
        return None
    m = max(cands, key=lambda s: s[1])
    for d in cands:
        if d != m and not d[1] < m[0]:
            return None
    return m


def build_visibility(st: SpanStructure, h: History) -> VisRelations:
    rel = VisRelations(h)
    owners = st.owners()
    for p in st.pointers():
        denoted = [b for b in st.dspans.get(p, ()) if b in owners]
        writers = sorted(st.wspans.get(p, ()), key=lambda s: (s[1], s[0]))
        wl = [s[1] for s in writers]
        # separable-before: l(b) < f(c)
        by_last = sorted(denoted, key=lambda s: s[1])
        lasts = [s[1] for s in by_last]
        for c in denoted:
            for b in by_last[:bisect_left(lasts, c[0])]:
                for x in owners[b]:
                    for y in owners[c]:
                        rel.sep[p].add((x, y))
        # observation: most recent writer span ending before c starts
        for c in denoted:
            m = _max_writer(writers[:bisect_left(wl, c[0])])
            if m is not None and m in owners and m in st.dspans.get(p, ()):
                for x in owners[m]:
                    for y in owners[c]:
                        rel.obs[p].add((x, y))
        if not st.opportunistic:
            continue
        for b in st.ospans.get(p, ()):
            if b not in owners:
                continue
            for c in writers:
                if c in owners and (b[0] < c[0] or b[1] < c[1]):
                    for x in owners[b]:
                        for y in owners[c]:
                            rel.sep[p].add((x, y))
            m = _max_writer([d for d in writers if d[0] < b[0] and d[1] < b[1]])
            if m is not None and m in owners:
                for x in owners[m]:
                    for y in owners[b]:
                        rel.obs[p].add((x, y))
    return rel


# ---------------------------------------------------------------- writer, W_p, A_p, Q

def writer_predicate(ev, p):
    """The value ``ev`` attempts to write into ``p``, or None."""
    proc, inp = ev.proc, ev.input
    if proc == "rdcss":
        return inp[4] if same(inp[1], p) else None
    if proc == "ralloc" or proc == "malloc":
        if ev.terminated and same(ev.output, p):
            return inp[0]
        return None
    if proc in ("rcas", "rcas_c"):
        return inp[2] if same(inp[0], p) else None
    if proc in ("rwrite", "rwrite_c", "mwrite"):
        return inp[1] if same(inp[0], p) else None
    if proc == "mcas":
        for e in inp:
            if same(e.pt, p):
                return e.new
    return None


def _observed_value(rel, p, x, v) -> bool:
    """∃ z. obs_p(z, x) ∧ writer(z, p, v)."""
    for z in rel.observers_of(p, x):
        w = writer_predicate(rel.events[z], p)
        if w is not None and same(w, v):
            return True
    return False


def _observed_any(rel, p, x) -> bool:
    return bool(rel.observers_of(p, x))


def touched_pointers(ev) -> list:
    """Pointers an event's W_p/A_p membership can mention."""
    proc, inp = ev.proc, ev.input
    if proc in ("ralloc", "malloc"):
        return [ev.output] if type(ev.output) is Ptr else []
    if proc == "rdcss":
        return [inp[1]]
    if proc == "mcas":
        return [e.pt for e in inp]
    if proc in ("rcas", "rcas_c", "rwrite", "rwrite_c", "mwrite"):
        return [inp[0]]
    return []


def in_writes(rel, x, p) -> bool:
    ev = rel.events[x]
    proc, inp = ev.proc, ev.input
    if proc == "rdcss":
        pt1, pt2, exp1, exp2, _ = inp
        return (same(p, pt2) and _observed_value(rel, pt1, x, exp1)
                and _observed_value(rel, pt2, x, exp2))
    if proc in ("ralloc", "malloc"):
        return ev.terminated and same(ev.output, p)
    if proc in ("rcas", "rcas_c"):
        q, e, _ = inp
        return same(p, q) and _observed_value(rel, q, x, e)
    if proc in ("rwrite", "rwrite_c", "mwrite"):
        return same(p, inp[0])
    if proc == "mcas":
        return (any(same(e.pt, p) for e in inp)
                and all(_observed_value(rel, e.pt, x, e.exp) for e in inp))
    return False


def in_allocs(rel, x, p) -> bool:
    ev = rel.events[x]
    return ev.proc in ("ralloc", "malloc") and ev.terminated and same(ev.output, p)


def post(rel, x, v) -> bool:
    """Postcondition predicate Q(x, v)."""
    ev = rel.events[x]
    proc, inp = ev.proc, ev.input
    if proc == "rdcss":
        pt1, pt2, _, exp2, _ = inp
        if not _observed_value(rel, pt2, x, v):
            return False
        return not same(v, exp2) or _observed_any(rel, pt1, x)
    if proc in ("ralloc", "malloc"):
        return ev.terminated and same(v, ev.output)
    if proc in ("rcas", "rcas_c", "rread", "rread_c", "mread"):
        return _observed_value(rel, inp[0], x, v)
    if proc in ("rwrite", "rwrite_c", "mwrite"):
        return v is TT
    if proc == "mcas":
        if type(v) is not bool:
            return False
        if v:
            return all(_observed_value(rel, e.pt, x, e.exp) for e in inp)
        for e in inp:
            for z in rel.observers_of(e.pt, x):
                w = writer_predicate(rel.events[z], e.pt)
                if w is not None and not same(w, e.exp):
                    return True
        return False
    return False


def candidate_values(rel, x) -> list:
    """Finite witness set for the existential in return value completion."""
    ev = rel.events[x]
    proc, inp = ev.proc, ev.input
    if proc == "mcas":
        return [True, False]
    if proc in ("ralloc", "malloc"):
        return [ev.output] if ev.terminated else []
    if proc in ("rwrite", "rwrite_c", "mwrite"):
        return [TT]
    p = inp[1] if proc == "rdcss" else inp[0]
    vals = []
    for z in sorted(rel.observers_of(p, x)):
        w = writer_predicate(rel.events[z], p)
        if w is not None and not any(same(w, u) for u in vals):
            vals.append(w)
    if ev.terminated and not any(same(ev.output, u) for u in vals):
        vals.append(ev.output)
    return vals


# ---------------------------------------------------------------- committed set

def committed_set(rel: VisRelations) -> set:
    preds = defaultdict(set)
    for a, b in rel.edges():
        preds[b].add(a)
    seen = {e.id for e in rel.history.events if e.terminated}
    stack = list(seen)
    while stack:
        y = stack.pop()
        for x in preds.get(y, ()):
            if x not in seen:
                seen.add(x)
                stack.append(x)
    return seen


# ---------------------------------------------------------------- axioms

def _abstract_sets(rel, xhat):
    writes = defaultdict(set)
    allocs = defaultdict(set)
    for x in xhat:
        ev = rel.events[x]
        for p in touched_pointers(ev):
            if in_writes(rel, x, p):
                writes[p].add(x)
            if in_allocs(rel, x, p):
                allocs[p].add(x)
    return writes, allocs


def check_visibility_axioms(rel: VisRelations, xhat: set | None = None) -> AxiomReport:
    rep = AxiomReport("visibility", ["no-in-between", "observed-are-writes", "no-future-dependences",
                                     "return-value-completion", "allocation-uniqueness",
                                     "written-pointers-allocated"])
    if xhat is None:
        xhat = committed_set(rel)
    writes, allocs = _abstract_sets(rel, xhat)
    ptr_key = lambda p: (p.kind, p.slot)  # noqa: E731

    for p in sorted(rel.obs, key=ptr_key):
        for w, r in sorted(rel.obs[p]):
            if w not in xhat or r not in xhat:
                continue
            if w not in writes.get(p, ()):
                rep.fail("observed-are-writes", f"obs_{p}(E{w}, E{r}) but E{w} is not a {p}-write")
            for w2 in sorted(writes.get(p, ())):
                if not (rel.sep_eq(p, w2, w) or rel.sep_eq(p, r, w2)):
                    rep.fail("no-in-between",
                             f"obs_{p}(E{w}, E{r}) with writer E{w2} not separated from either")

    ids = sorted(xhat)
    pos = {e: i for i, e in enumerate(ids)}
    rows = [0] * len(ids)
    for a, b in rel.edges():
        if a in pos and b in pos:
            rows[pos[a]] |= 1 << pos[b]
    reach = kernels.closure(rows)
    for i, x in enumerate(ids):
        r = reach[i]
        ex = rel.events[x]
        while r:
            low = r & -r
            j = low.bit_length() - 1
            r ^= low
            y = ids[j]
            ey = rel.events[y]
            if y == x:
                rep.fail("no-future-dependences", f"E{x} depends on itself")
            elif ey.end is not None and ey.end < ex.start:
                rep.fail("no-future-dependences", f"E{x} depends on E{y}, which returned before E{x} began")

    for x in ids:
        ev = rel.events[x]
        ok = False
        for v in candidate_values(rel, x):
            if post(rel, x, v) and (not ev.terminated or same(v, ev.output)):
                ok = True
                break
        if not ok:
            rep.fail("return-value-completion", f"no admissible return value for E{x} ({ev.proc})")

    for p in sorted(allocs, key=ptr_key):
        if len(allocs[p]) > 1:
            rep.fail("allocation-uniqueness",
                     f"{p} allocated by " + ", ".join(f"E{a}" for a in sorted(allocs[p])))
    for p in sorted(writes, key=ptr_key):
        for w in sorted(writes[p]):
            if not any(rel.sep_eq(p, a, w) for a in allocs.get(p, ())):
                rep.fail("written-pointers-allocated", f"E{w} writes {p} with no allocation before it")
    return rep


# ---------------------------------------------------------------- linearization

@dataclass
class Linearization:
    order: list
    outputs: dict = field(default_factory=dict)
    eq4_violations: list = field(default_factory=list)

    @property
    def eq4_holds(self) -> bool:
        return not self.eq4_violations


def _find_cycle(n, preds):
    succ = [[] for _ in range(n)]
    for i, row in enumerate(preds):
        r = row
        while r:
            low = r & -r
            j = low.bit_length() - 1
            r ^= low
            succ[j].append(i)
    color = [0] * n
    for s in range(n):
        if color[s]:
            continue
        stack = [(s, iter(succ[s]))]
        path = [s]
        color[s] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
            elif color[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return []


def linearize(rel: VisRelations, xhat: set | None = None) -> Linearization:
    if xhat is None:
        xhat = committed_set(rel)
    ids = sorted(xhat)
    pos = {e: i for i, e in enumerate(ids)}
    evs = [rel.events[e] for e in ids]
    preds = kernels.before_matrix([e.start for e in evs], [e.end for e in evs])
    for a, b in rel.edges():
        if a in pos and b in pos:
            preds[pos[b]] |= 1 << pos[a]
    order = kernels.topo_sort(preds, [(e.start, e.id) for e in evs])
    if order is None:
        raise LinearizationError([ids[i] for i in _find_cycle(len(ids), preds)])
    lin = Linearization([ids[i] for i in order])
    where = {e: i for i, e in enumerate(lin.order)}
    writes, _ = _abstract_sets(rel, xhat)
    wpos = {p: sorted(where[w] for w in ws) for p, ws in writes.items()}
    for p in sorted(rel.obs, key=lambda p: (p.kind, p.slot)):
        for x, y in sorted(rel.obs[p]):
            if x not in where or y not in where:
                continue
            ps = wpos.get(p, [])
            lo, hi = where[x], where[y]
            if lo < hi and bisect_left(ps, hi) > bisect_right(ps, lo):
                z = lin.order[ps[bisect_right(ps, lo)]]
                lin.eq4_violations.append(f"obs_{p}(E{x}, E{y}) with {p}-write E{z} between them")
            elif lo > hi:
                lin.eq4_violations.append(f"obs_{p}(E{x}, E{y}) ordered backwards")
    return lin


# ---------------------------------------------------------------- replay

@dataclass
class ReplayReport:
    sound: bool
    index: int | None = None
    event: int | None = None
    expected: object = None
    recorded: object = None
    reason: str = ""
    outputs: dict = field(default_factory=dict)

    def render(self) -> str:
        if self.sound:
            return "replay: sound"
        return (f"replay: mismatch at index {self.index} (E{self.event}): {self.reason}; "
                f"expected {self.expected!r}, recorded {self.recorded!r}")


class _NoStep(Exception):
    pass


def _step(heap, proc, inp, recorded, fresh):
    """One operational step; returns the output and mutates ``heap``."""

    def get(p):
        if p not in heap:
            raise _NoStep(f"pointer {p} not allocated")
        return heap[p]

    if proc in ("malloc", "ralloc"):
        kind = DPTR if proc == "malloc" else inp[1]
        p = recorded if recorded is not None else fresh(kind)
        if p in heap:
            raise _NoStep(f"pointer {p} already allocated")
        heap[p] = inp[0]
        return p
    if proc in ("mread", "rread", "rread_c"):
        return get(inp[0])
    if proc in ("mwrite", "rwrite", "rwrite_c"):
        get(inp[0])
        heap[inp[0]] = inp[1]
        return TT
    if proc in ("rcas", "rcas_c"):
        p, e, n = inp
        v = get(p)
        if same(v, e):
            heap[p] = n
        return v
    if proc == "rdcss":
        pt1, pt2, exp1, exp2, new2 = inp
        v = get(pt2)
        if not same(v, exp2):
            return v
        if same(get(pt1), exp1):
            heap[pt2] = new2
        return exp2
    if proc == "mcas":
        vals = [get(e.pt) for e in inp]
        if all(same(v, e.exp) for v, e in zip(vals, inp)):
            for e in inp:
                heap[e.pt] = e.new
            return True
        return False
    raise _NoStep(f"unknown procedure {proc}")


def replay(order: list, h: History, layer: str | None = None) -> ReplayReport:
    layer = layer or h.layer
    allowed = MCAS_PROCS if layer == "mcas" else tuple(
        p for p in ("rdcss", "rread", "rcas", "rwrite", "rread_c", "rcas_c", "rwrite_c", "ralloc"))
    events = {e.id: e for e in h.events}
    heap = {}
    counter = iter(range(1 << 62, 1 << 63))
    fresh = lambda kind: Ptr(kind, next(counter))  # noqa: E731
    outputs = {}
    for i, x in enumerate(order):
        ev = events[x]
        if ev.proc not in allowed:
            return ReplayReport(False, i, x, None, ev.output, f"{ev.proc} is not a {layer} step")
        rec = ev.output if ev.terminated else None
        try:
            out = _step(heap, ev.proc, ev.input, rec if ev.proc in ("malloc", "ralloc") else None, fresh)
        except _NoStep as exc:
            return ReplayReport(False, i, x, None, ev.output, str(exc))
        if ev.terminated and not same(out, ev.output):
            return ReplayReport(False, i, x, out, ev.output, "output differs")
        outputs[x] = out
    return ReplayReport(True, outputs=outputs)


__all__ = [
    "VisRelations", "LinearizationError", "Linearization", "ReplayReport", "build_visibility",
    "writer_predicate", "in_writes", "in_allocs", "post", "candidate_values", "committed_set",
    "check_visibility_axioms", "linearize", "replay",
]
