"""Lock-free MCAS built on the RDCSS layer.

Every RDCSS call made here is recorded as an exportable rep event whose
ticket is the primitive that fixed its outcome. Two mread strategies are
available: ``helping`` completes any MCAS it runs into, ``opportunistic``
reads the descriptor status and returns the value the MCAS implies.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

from . import lines as L
from .core_rdcss import REP, Arena, Ctx, Rdcss, RdcssDescriptor, drive
from .history import EXPORTABLE, Recorder
from .words import (CPTR, DPTR, FAIL, MDESC, SUCC, TT, UNDEC, Desc, Entry, Ptr,
                    UsageError, acquisition_order, check_val, is_mdesc)

STRATEGIES = ("helping", "opportunistic")


@dataclass(frozen=True, slots=True)
class McasDescriptor:
    status: Ptr
    entries: tuple

    def entry_for(self, ptr: Ptr) -> Entry:
        for e in self.entries:
            if e.pt == ptr:
                return e
        raise KeyError(ptr)


class Mcas:
    def __init__(self, arena: Arena, recorder: Recorder, strategy: str = "helping",
                 mutation: str | None = None):
        if strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {strategy!r}")
        self.arena = arena
        self.rec = recorder
        self.strategy = strategy
        self.mutation = mutation
        self.rdcss = Rdcss(arena, recorder, mutation, top=False)

    def _x(self, ctx, line, call, operands, shared=True):
        """Run one RDCSS call and record it as an exportable rep."""
        if shared:
            yield REP
        start = self.rec.clock.tick()
        value, ticket, effect = yield from call
        end = self.rec.clock.tick()
        self.rec.record_rep(ctx.thread, ctx.event, line, operands, value, effect,
                            EXPORTABLE, ticket, start, end)
        return value

    def _record(self, ctx, d: Desc) -> McasDescriptor:
        ptr = Ptr(DPTR, d.slot)
        w = yield from self._x(ctx, L.HELP_READ_DESC, self.rdcss.rread_call(ctx, ptr, False),
                               (ptr,), shared=False)
        return self.arena.records[w.slot]

    # -- algorithm

    def mcas_call(self, ctx, entries: tuple):
        r = self.rdcss
        status = yield from self._x(ctx, L.ALLOC_STATUS, r.ralloc_call(ctx, UNDEC, CPTR),
                                    (CPTR, UNDEC), shared=False)
        record = McasDescriptor(status, entries)
        operands = (DPTR, status, *entries)
        dptr = yield from self._x(ctx, L.ALLOC_MDESC, r.alloc_mdesc_call(ctx, record, operands),
                                  operands, shared=False)
        return (yield from self._help(ctx, Desc(MDESC, dptr.slot)))

    def _help(self, ctx, d: Desc):
        r = self.rdcss
        record = yield from self._record(ctx, d)
        status = record.status
        phase1 = yield from self._x(ctx, L.HELP_PHASE1, r.rread_c_call(ctx, status), (status,))
        if phase1 == UNDEC:
            outcome = yield from self._write_all(ctx, d, record)
            if self.mutation == "early-removal":
                yield from self._remove(ctx, d, record, outcome == SUCC)
            yield from self._x(ctx, L.HELP_RESOLVE, r.rcas_c_call(ctx, status, UNDEC, outcome),
                               (status, UNDEC, outcome))
        phase2 = yield from self._x(ctx, L.HELP_PHASE2, r.rread_c_call(ctx, status), (status,))
        ok = phase2 == SUCC
        yield from self._remove(ctx, d, record, ok)
        return ok

    def _remove(self, ctx, d, record, ok):
        for e in record.entries:
            target = e.new if ok else e.exp
            yield from self._x(ctx, L.HELP_REMOVE, self.rdcss.rcas_call(ctx, e.pt, d, target),
                               (e.pt, d, target))

    def _write_all(self, ctx, d, record):
        status = record.status
        # a global acquisition order keeps mutual helping from cycling
        for e in acquisition_order(record.entries):
            while True:
                desc = RdcssDescriptor(status, e.pt, UNDEC, e.exp, d)
                val = yield from self._x(ctx, L.INVOKE_RDCSS, self.rdcss.rdcss_call(ctx, desc),
                                         desc.operands)
                if is_mdesc(val) and val != d:
                    yield from self._help(ctx, val)
                    continue
                if val != e.exp and val != d:
                    return FAIL
                if val == e.exp:
                    ctx.published = True
                break
        return SUCC

    def mread_call(self, ctx, ptr):
        r = self.rdcss
        while True:
            val = yield from self._x(ctx, L.MREAD, r.rread_call(ctx, ptr), (ptr,))
            if not is_mdesc(val):
                return val
            if self.strategy == "helping":
                yield from self._help(ctx, val)
                continue
            dptr = Ptr(DPTR, val.slot)
            w = yield from self._x(ctx, L.MREAD_DESC, r.rread_call(ctx, dptr, False),
                                   (dptr,), shared=False)
            record = self.arena.records[w.slot]
            st = yield from self._x(ctx, L.MREAD_STATUS, r.rread_c_call(ctx, record.status),
                                    (record.status,))
            e = record.entry_for(ptr)
            return e.new if st == SUCC else e.exp

    def mwrite_call(self, ctx, ptr, v):
        r = self.rdcss
        while True:
            old = yield from self._x(ctx, L.MWRITE_READ, r.rread_call(ctx, ptr), (ptr,))
            if is_mdesc(old):
                yield from self._help(ctx, old)
                continue
            x = yield from self._x(ctx, L.MWRITE_CAS, r.rcas_call(ctx, ptr, old, v),
                                   (ptr, old, v))
            if x == old and type(x) is type(old):
                return TT

    def malloc_call(self, ctx, v):
        return (yield from self._x(ctx, L.MALLOC, self.rdcss.ralloc_call(ctx, v, DPTR),
                                   (DPTR, v), shared=False))

    # -- events

    def _event(self, ctx, proc, inp, call):
        ctx.event = self.rec.begin_event(ctx.thread, proc, inp)
        out = yield from call
        self.rec.end_event(ctx.event, out)
        return out

    def _check_ptr(self, ptr):
        if type(ptr) is not Ptr or ptr.kind != DPTR:
            raise UsageError(f"expected a data pointer, got {ptr!r}")
        self.arena._check(ptr)

    def mcas(self, ctx, entries):
        entries = tuple(entries)
        if not entries:
            raise UsageError("mcas needs at least one entry")
        seen = set()
        for e in entries:
            if type(e) is not Entry:
                raise UsageError(f"not an entry: {e!r}")
            self._check_ptr(e.pt)
            check_val(e.exp), check_val(e.new)
            if e.pt in seen:
                raise UsageError(f"pointer {e.pt} appears twice")
            seen.add(e.pt)
        return self._event(ctx, "mcas", entries, self.mcas_call(ctx, entries))

    def mread(self, ctx, ptr):
        self._check_ptr(ptr)
        return self._event(ctx, "mread", (ptr,), self.mread_call(ctx, ptr))

    def mwrite(self, ctx, ptr, v):
        self._check_ptr(ptr)
        check_val(v)
        return self._event(ctx, "mwrite", (ptr, v), self.mwrite_call(ctx, ptr, v))

    def malloc(self, ctx, v):
        check_val(v)
        return self._event(ctx, "malloc", (v,), self.malloc_call(ctx, v))


class McasMemory:
    """Blocking, thread-safe front end recording one event per call."""

    def __init__(self, strategy: str = "helping", recorder: Recorder | None = None,
                 arena: Arena | None = None, mutation: str | None = None):
        self.recorder = recorder or Recorder(meta={"layer": "mcas", "strategy": strategy})
        self.arena = arena or Arena(self.recorder.clock)
        self.algo = Mcas(self.arena, self.recorder, strategy, mutation)
        self._local = threading.local()
        self._next_thread = iter(range(1 << 30)).__next__

    def _ctx(self) -> Ctx:
        ctx = getattr(self._local, "ctx", None)
        if ctx is None:
            ctx = self._local.ctx = Ctx(self._next_thread())
        return ctx

    def malloc(self, v: int) -> Ptr:
        return drive(self.algo.malloc(self._ctx(), v))

    def mread(self, p: Ptr) -> int:
        return drive(self.algo.mread(self._ctx(), p))

    def mwrite(self, p: Ptr, v: int):
        return drive(self.algo.mwrite(self._ctx(), p, v))

    def mcas(self, entries) -> bool:
        return drive(self.algo.mcas(self._ctx(), [e if type(e) is Entry else Entry(*e)
                                                  for e in entries]))

    def history(self):
        return self.recorder.history()
