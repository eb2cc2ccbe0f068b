"""Lock-free RDCSS over control and data pointers.

Algorithms are written as generators. Each one yields a scheduling token
right before touching shared memory and returns its result through
``StopIteration``. Real threads drive them with :func:`drive`; the
simulated scheduler in :mod:`mcasvis.harness` interleaves them token by
token. Either way the same code runs.

Python has no user-level compare-and-swap, so :class:`Arena` emulates the
single-word atomics with one short critical section per instruction. The
algorithms themselves never block.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from . import lines as L
from .history import ALLOC, FAIL, PRIMITIVE, READ, WRITE, Clock, Recorder
from .words import (CPTR, DPTR, RDESC, MDESC, TT, CapacityError, Desc, Ptr, UsageError,
                    check_val, decode, encode, is_rdesc)

# scheduling tokens
PRIM = 1  # before a shared primitive instruction
REP = 2   # before an exportable RDCSS call issued by MCAS

DEFAULT_CELLS = 1 << 20
DEFAULT_DESCRIPTORS = 1 << 20

MUTATIONS = {
    "skip-helping": "rread returns a found RDCSS descriptor with its tag stripped instead of helping",
    "skip-undec-check": "complete installs new2 without comparing pt1 against exp1 "
                        "(for MCAS: the status-is-Undec test that guards installation)",
    "early-removal": "mcas_help removes descriptors before resolving the status",
}


def env_capacity(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None
    if value <= 0:
        raise UsageError(f"{name} must be positive")
    return value


@dataclass(frozen=True, slots=True)
class RdcssDescriptor:
    pt1: Ptr
    pt2: Ptr
    exp1: object
    exp2: object
    new2: object

    @property
    def operands(self) -> tuple:
        return (self.pt1, self.pt2, self.exp1, self.exp2, self.new2)


class Arena:
    """Append-only arena of tagged 64-bit cells.

    Descriptor records live in ordinary data cells whose word references the
    cell itself, so reading the descriptor pointer yields its reference.
    """

    def __init__(self, clock: Clock | None = None, capacity: int | None = None,
                 descriptor_capacity: int | None = None):
        self.clock = clock or Clock()
        self.capacity = capacity or env_capacity("MCASVIS_CELLS", DEFAULT_CELLS)
        self.descriptor_capacity = descriptor_capacity or env_capacity(
            "MCASVIS_DESCRIPTORS", DEFAULT_DESCRIPTORS)
        self._cells: list[int] = []
        self._kinds: list[str] = []
        self._lock = threading.Lock()
        self.records: dict[int, object] = {}
        # rdcss descriptor slot -> (ticket of the deciding pt1 read, installed new2?)
        self.resolved: dict[int, tuple[int, bool]] = {}

    def __len__(self) -> int:
        return len(self._cells)

    def _check(self, ptr: Ptr) -> int:
        slot = ptr.slot
        if type(ptr) is not Ptr or not 0 <= slot < len(self._cells) or self._kinds[slot] != ptr.kind:
            raise UsageError(f"unallocated pointer {ptr}")
        return slot

    def alloc(self, kind: str, word) -> tuple[Ptr, int]:
        x = encode(word)
        with self._lock:
            if len(self._cells) >= self.capacity:
                raise CapacityError(f"cell arena full ({self.capacity})")
            slot = len(self._cells)
            self._cells.append(x)
            self._kinds.append(kind)
            return Ptr(kind, slot), self.clock.tick()

    def alloc_record(self, tag: int, record) -> tuple[Ptr, int]:
        with self._lock:
            if len(self._cells) >= self.capacity:
                raise CapacityError(f"cell arena full ({self.capacity})")
            if len(self.records) >= self.descriptor_capacity:
                raise CapacityError(f"descriptor arena full ({self.descriptor_capacity})")
            slot = len(self._cells)
            self._cells.append(encode(Desc(tag, slot)))
            self._kinds.append(DPTR)
            self.records[slot] = record
            return Ptr(DPTR, slot), self.clock.tick()

    def read(self, ptr: Ptr):
        with self._lock:
            slot = self._check(ptr)
            return decode(self._cells[slot]), self.clock.tick()

    def cas(self, ptr: Ptr, exp, new, publish: tuple | None = None):
        e, n = encode(exp), encode(new)
        with self._lock:
            slot = self._check(ptr)
            old = self._cells[slot]
            if old == e:
                self._cells[slot] = n
                if publish is not None:
                    self.resolved[publish[0]] = publish[1]
            return decode(old), self.clock.tick()

    def write(self, ptr: Ptr, word) -> int:
        x = encode(word)
        with self._lock:
            slot = self._check(ptr)
            self._cells[slot] = x
            return self.clock.tick()

    def peek(self, ptr: Ptr):
        """Current content without recording; for tests and diagnostics."""
        with self._lock:
            return decode(self._cells[self._check(ptr)])


class Ctx:
    """Per-thread execution context: thread id and current event."""

    __slots__ = ("thread", "event", "published")

    def __init__(self, thread: int = 0):
        self.thread = thread
        self.event = -1
        self.published = False


def drive(gen):
    """Run an algorithm generator to completion, ignoring scheduling tokens."""
    try:
        while True:
            next(gen)
    except StopIteration as stop:
        return stop.value


class Rdcss:
    """RDCSS algorithms over an arena.

    The ``*_call`` generators return ``(value, ticket, effect)``: the ticket
    is the primitive that fixed the outcome and positions the call when MCAS
    records it as a rep event.
    """

    def __init__(self, arena: Arena, recorder: Recorder, mutation: str | None = None,
                 top: bool = True):
        self.top = top  # only the outermost layer marks a context as published
        if mutation is not None and mutation not in MUTATIONS:
            raise UsageError(f"unknown mutation {mutation!r}")
        self.arena = arena
        self.rec = recorder
        self.mutation = mutation

    # -- primitives

    def _rep(self, ctx, line, operands, output, effect, ticket):
        self.rec.record_rep(ctx.thread, ctx.event, line, operands, output, effect,
                            PRIMITIVE, ticket)

    def _read(self, ctx, line, ptr, shared=True):
        if shared:
            yield PRIM
        w, t = self.arena.read(ptr)
        self._rep(ctx, line, (ptr,), w, READ, t)
        return w, t

    def _cas(self, ctx, line, ptr, exp, new, publish=None):
        yield PRIM
        old, t = self.arena.cas(ptr, exp, new, publish)
        self._rep(ctx, line, (ptr, exp, new), old, WRITE if old == exp else FAIL, t)
        return old, t

    def _write(self, ctx, line, ptr, v):
        yield PRIM
        t = self.arena.write(ptr, v)
        self._rep(ctx, line, (ptr, v), TT, WRITE, t)
        return t

    # -- exportable calls

    def ralloc_call(self, ctx, v, kind):
        if kind not in (CPTR, DPTR):
            raise UsageError(f"bad pointer kind {kind!r}")
        check_val(v)
        ptr, t = self.arena.alloc(kind, v)
        self._rep(ctx, L.RALLOC_C if kind == CPTR else L.RALLOC_D, (kind, v), ptr, ALLOC, t)
        return ptr, t, ALLOC
        yield  # pragma: no cover - makes this a generator

    def alloc_mdesc_call(self, ctx, record, operands):
        """ralloc(desc, dptr) for an MCAS descriptor record."""
        ptr, t = self.arena.alloc_record(MDESC, record)
        self._rep(ctx, L.RALLOC_D, operands, ptr, ALLOC, t)
        return ptr, t, ALLOC
        yield  # pragma: no cover

    def rdcss_call(self, ctx, desc: RdcssDescriptor):
        self._check_desc(desc)
        dptr, t = self.arena.alloc_record(RDESC, desc)
        d = Desc(RDESC, dptr.slot)
        self._rep(ctx, L.ALLOC_RDESC, desc.operands, d, ALLOC, t)
        while True:
            old, t = yield from self._cas(ctx, L.LOOP_CAS, desc.pt2, desc.exp2, d)
            if is_rdesc(old):
                yield from self._complete(ctx, old)
                continue
            if old == desc.exp2:
                if self.top:
                    ctx.published = True
                yield from self._complete(ctx, d)
                lp, installed = self.arena.resolved[d.slot]
                return old, lp, WRITE if installed else FAIL
            return old, t, FAIL

    def _complete(self, ctx, d: Desc):
        w, _ = yield from self._read(ctx, L.COMPLETE_READ_DESC, Ptr(DPTR, d.slot), shared=False)
        desc = self.arena.records[w.slot]
        x, t1 = yield from self._read(ctx, L.COMPLETE_READ_PT1, desc.pt1)
        if x == desc.exp1 or self.mutation == "skip-undec-check":
            yield from self._cas(ctx, L.COMPLETE_SUCCESS, desc.pt2, d, desc.new2,
                                 publish=(d.slot, (t1, True)))
        else:
            yield from self._cas(ctx, L.COMPLETE_UNDO, desc.pt2, d, desc.exp2,
                                 publish=(d.slot, (t1, False)))

    def rread_call(self, ctx, ptr, shared=True):
        self._check_kind(ptr, DPTR)
        while True:
            old, t = yield from self._read(ctx, L.RREAD, ptr, shared)
            if is_rdesc(old):
                if self.mutation == "skip-helping":
                    return old.slot, t, READ
                yield from self._complete(ctx, old)
                continue
            return old, t, READ

    def rcas_call(self, ctx, ptr, exp, new):
        self._check_kind(ptr, DPTR)
        while True:
            old, t = yield from self._cas(ctx, L.RCAS, ptr, exp, new)
            if is_rdesc(old):
                yield from self._complete(ctx, old)
                continue
            return old, t, WRITE if old == exp else FAIL

    def rwrite_call(self, ctx, ptr, v):
        self._check_kind(ptr, DPTR)
        while True:
            old, _ = yield from self._read(ctx, L.RWRITE_READ, ptr)
            if is_rdesc(old):
                yield from self._complete(ctx, old)
                continue
            x, t = yield from self._cas(ctx, L.RWRITE_CAS, ptr, old, v)
            if x == old:
                return TT, t, WRITE

    def rread_c_call(self, ctx, ptr):
        self._check_kind(ptr, CPTR)
        w, t = yield from self._read(ctx, L.RREAD_C, ptr)
        return w, t, READ

    def rcas_c_call(self, ctx, ptr, exp, new):
        self._check_kind(ptr, CPTR)
        old, t = yield from self._cas(ctx, L.RCAS_C, ptr, exp, new)
        return old, t, WRITE if old == exp else FAIL

    def rwrite_c_call(self, ctx, ptr, v):
        self._check_kind(ptr, CPTR)
        t = yield from self._write(ctx, L.RWRITE_C, ptr, v)
        return TT, t, WRITE

    # -- argument checks

    def _check_kind(self, ptr, kind):
        if type(ptr) is not Ptr or ptr.kind != kind:
            raise UsageError(f"expected a {kind} pointer, got {ptr!r}")
        self.arena._check(ptr)

    def _check_desc(self, desc):
        self._check_kind(desc.pt1, CPTR)
        self._check_kind(desc.pt2, DPTR)
        encode(desc.exp1)
        for w in (desc.exp2, desc.new2):
            if is_rdesc(w) or type(w) not in (int, Desc):
                raise UsageError(f"not a value: {w!r}")
            encode(w)

    # -- events

    def _event(self, ctx, proc, inp, call):
        ctx.event = self.rec.begin_event(ctx.thread, proc, inp)
        out, _, _ = yield from call
        self.rec.end_event(ctx.event, out)
        return out

    def ralloc(self, ctx, v, kind):
        return self._event(ctx, "ralloc", (v, kind), self.ralloc_call(ctx, v, kind))

    def rdcss(self, ctx, desc: RdcssDescriptor):
        for v in (desc.exp1, desc.exp2, desc.new2):
            check_val(v)
        return self._event(ctx, "rdcss", desc.operands, self.rdcss_call(ctx, desc))

    def rread(self, ctx, ptr):
        return self._event(ctx, "rread", (ptr,), self.rread_call(ctx, ptr))

    def rcas(self, ctx, ptr, exp, new):
        check_val(exp), check_val(new)
        return self._event(ctx, "rcas", (ptr, exp, new), self.rcas_call(ctx, ptr, exp, new))

    def rwrite(self, ctx, ptr, v):
        check_val(v)
        return self._event(ctx, "rwrite", (ptr, v), self.rwrite_call(ctx, ptr, v))

    def rread_c(self, ctx, ptr):
        return self._event(ctx, "rread_c", (ptr,), self.rread_c_call(ctx, ptr))

    def rcas_c(self, ctx, ptr, exp, new):
        check_val(exp), check_val(new)
        return self._event(ctx, "rcas_c", (ptr, exp, new), self.rcas_c_call(ctx, ptr, exp, new))

    def rwrite_c(self, ctx, ptr, v):
        check_val(v)
        return self._event(ctx, "rwrite_c", (ptr, v), self.rwrite_c_call(ctx, ptr, v))

    def control_op(self, ctx, ptr, op: str, *args):
        """Dispatch ``read``, ``cas`` or ``write`` on a control pointer."""
        ops = {"read": self.rread_c, "cas": self.rcas_c, "write": self.rwrite_c}
        if op not in ops:
            raise UsageError(f"unknown control op {op!r}")
        return ops[op](ctx, ptr, *args)


class RdcssMemory:
    """Blocking front end: each call records one event and runs to completion.

    Safe to share between threads; every OS thread gets its own context.
    """

    def __init__(self, recorder: Recorder | None = None, arena: Arena | None = None,
                 mutation: str | None = None):
        self.recorder = recorder or Recorder(meta={"layer": "rdcss"})
        self.arena = arena or Arena(self.recorder.clock)
        self.algo = Rdcss(self.arena, self.recorder, mutation)
        self._local = threading.local()
        self._next_thread = iter(range(1 << 30)).__next__

    def _ctx(self) -> Ctx:
        ctx = getattr(self._local, "ctx", None)
        if ctx is None:
            ctx = self._local.ctx = Ctx(self._next_thread())
        return ctx

    def ralloc(self, v: int, kind: str) -> Ptr:
        return drive(self.algo.ralloc(self._ctx(), v, kind))

    def rdcss(self, pt1: Ptr, pt2: Ptr, exp1: int, exp2: int, new2: int) -> int:
        return drive(self.algo.rdcss(self._ctx(), RdcssDescriptor(pt1, pt2, exp1, exp2, new2)))

    def rread(self, p: Ptr) -> int:
        return drive(self.algo.rread(self._ctx(), p))

    def rcas(self, p: Ptr, exp: int, new: int) -> int:
        return drive(self.algo.rcas(self._ctx(), p, exp, new))

    def rwrite(self, p: Ptr, v: int):
        return drive(self.algo.rwrite(self._ctx(), p, v))

    def control_op(self, p: Ptr, op: str, *args):
        return drive(self.algo.control_op(self._ctx(), p, op, *args))

    def history(self):
        return self.recorder.history()
