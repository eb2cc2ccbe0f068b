"""Recording of events and rep events, and the history text format.

One clock supplies every ticket: event start/end times and the position of
primitive rep events. Exportable reps (RDCSS calls made by MCAS) reuse the
ticket of the primitive that fixed their outcome, so they sort by (ticket,
layer).

File format, one tab-separated record per line::

    META  key  value
    EVT   id  T<thread>  proc  input  output  start  end
    REP   ticket  line  T<thread>  E<event>  layer  operands  output  effect  start  end
    END   <events>  <reps>
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import IO, Iterable

from .lines import ALL_LINES
from .words import CPTR, DPTR, MDESC, RDESC, TT, Desc, Entry, Ptr, UsageError

PRIMITIVE = "primitive"
EXPORTABLE = "rdcss_exportable"
LAYERS = (PRIMITIVE, EXPORTABLE)

READ, WRITE, ALLOC, FAIL = "read", "write", "alloc", "fail"
EFFECTS = (READ, WRITE, ALLOC, FAIL)

RDCSS_PROCS = ("rdcss", "rread", "rcas", "rwrite", "rread_c", "rcas_c", "rwrite_c", "ralloc")
MCAS_PROCS = ("mcas", "mread", "mwrite", "malloc")
PROCS = RDCSS_PROCS + MCAS_PROCS


class HistoryParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class Clock:
    """Global monotone ticket counter."""

    def __init__(self, start: int = 1):
        self.tick = itertools.count(start).__next__


@dataclass(slots=True)
class Event:
    id: int
    thread: int
    proc: str
    input: tuple
    output: object = None
    start: int = 0
    end: int | None = None

    @property
    def terminated(self) -> bool:
        return self.end is not None


@dataclass(slots=True)
class Rep:
    ticket: int
    line: str
    thread: int
    event: int
    layer: str
    operands: tuple
    output: object
    effect: str
    start: int
    end: int

    @property
    def key(self) -> tuple:
        return (self.ticket, LAYERS.index(self.layer))


@dataclass
class History:
    meta: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    reps: list = field(default_factory=list)

    def event(self, eid: int) -> Event:
        return self._index()[eid]

    def _index(self) -> dict:
        idx = getattr(self, "_eidx", None)
        if idx is None or len(idx) != len(self.events):
            idx = {e.id: e for e in self.events}
            object.__setattr__(self, "_eidx", idx)
        return idx

    def layer_reps(self, layer: str) -> list:
        return [r for r in self.reps if r.layer == layer]

    @property
    def layer(self) -> str:
        return self.meta.get("layer", "mcas")

    @property
    def strategy(self) -> str:
        return self.meta.get("strategy", "helping")

    def __eq__(self, other) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return (self.meta == other.meta and self.events == other.events
                and self.reps == other.reps)


class Recorder:
    """Wait-free recorder: each thread appends to its own log."""

    def __init__(self, clock: Clock | None = None, meta: dict | None = None):
        self.clock = clock or Clock()
        self.meta = dict(meta or {})
        self._ids = itertools.count(0).__next__
        self._events: dict[int, Event] = {}
        self._logs: dict[int, list] = {}
        self._lock = threading.Lock()

    def begin_event(self, thread: int, proc: str, inp: tuple) -> int:
        if proc not in PROCS:
            raise UsageError(f"unknown procedure {proc!r}")
        eid = self._ids()
        self._events[eid] = Event(eid, thread, proc, tuple(inp), None, self.clock.tick(), None)
        return eid

    def end_event(self, eid: int, output) -> None:
        ev = self._events.get(eid)
        if ev is None:
            raise UsageError(f"no such event {eid}")
        if ev.end is not None:
            raise UsageError(f"event {eid} already ended")
        ev.output = output
        ev.end = self.clock.tick()

    def record_rep(self, thread: int, eid: int, line: str, operands: tuple, output,
                   effect: str, layer: str = PRIMITIVE, ticket: int | None = None,
                   start: int | None = None, end: int | None = None) -> int:
        if ticket is None:
            ticket = self.clock.tick()
        log = self._logs.get(thread)
        if log is None:
            log = self._logs.setdefault(thread, [])
        log.append(Rep(ticket, line, thread, eid, layer, tuple(operands), output, effect,
                       ticket if start is None else start, ticket if end is None else end))
        return ticket

    def history(self) -> History:
        events = sorted(self._events.values(), key=lambda e: e.id)
        reps = sorted(itertools.chain.from_iterable(self._logs.values()), key=lambda r: r.key)
        return History(dict(self.meta), [_copy_event(e) for e in events], reps)


def _copy_event(e: Event) -> Event:
    return Event(e.id, e.thread, e.proc, e.input, e.output, e.start, e.end)


# ---------------------------------------------------------------- tokens

def fmt_token(x) -> str:
    if x is None:
        return "_"
    if x is True:
        return "true"
    if x is False:
        return "false"
    if type(x) is int:
        return str(x)
    if x is TT:
        return "tt"
    if type(x) in (Ptr, Desc, Entry):
        return str(x)
    if x in (CPTR, DPTR):
        return x
    raise ValueError(f"cannot format {x!r}")


def parse_token(s: str):
    if not s:
        raise ValueError("empty token")
    if s == "_":
        return None
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "tt":
        return TT
    if s in (CPTR, DPTR):
        return s
    if ":" in s:
        pt, exp, new = s.split(":")
        ptr = parse_token(pt)
        if type(ptr) is not Ptr:
            raise ValueError(f"bad entry {s!r}")
        return Entry(ptr, _nat(exp), _nat(new))
    head, rest = s[0], s[1:]
    if head.isdigit():
        return _nat(s)
    if head == "c":
        return Ptr(CPTR, _nat(rest))
    if head == "d":
        return Ptr(DPTR, _nat(rest))
    if head == "r":
        return Desc(RDESC, _nat(rest))
    if head == "m":
        return Desc(MDESC, _nat(rest))
    raise ValueError(f"bad token {s!r}")


def _nat(s: str) -> int:
    if not s.isdigit():
        raise ValueError(f"not a natural number: {s!r}")
    return int(s)


def fmt_tuple(t: tuple) -> str:
    return ",".join(fmt_token(x) for x in t) if t else "-"


def parse_tuple(s: str) -> tuple:
    if s == "-":
        return ()
    return tuple(parse_token(x) for x in s.split(","))


def _opt(s: str) -> int | None:
    return None if s == "_" else _nat(s)


# ---------------------------------------------------------------- export/import

def export_lines(h: History) -> Iterable[str]:
    for k in sorted(h.meta):
        yield f"META\t{k}\t{h.meta[k]}"
    for e in h.events:
        end = "_" if e.end is None else str(e.end)
        yield (f"EVT\t{e.id}\tT{e.thread}\t{e.proc}\t{fmt_tuple(e.input)}\t"
               f"{fmt_token(e.output)}\t{e.start}\t{end}")
    for r in h.reps:
        yield (f"REP\t{r.ticket}\t{r.line}\tT{r.thread}\tE{r.event}\t{r.layer}\t"
               f"{fmt_tuple(r.operands)}\t{fmt_token(r.output)}\t{r.effect}\t{r.start}\t{r.end}")
    yield f"END\t{len(h.events)}\t{len(h.reps)}"


def dumps(h: History) -> str:
    return "\n".join(export_lines(h)) + "\n"


def export(h: History, sink: IO[str]) -> None:
    for line in export_lines(h):
        sink.write(line)
        sink.write("\n")


def loads(text: str) -> History:
    return load_lines(text.splitlines())


def load(source: IO[str]) -> History:
    return load_lines(source.read().splitlines())


def load_lines(lines: Iterable[str]) -> History:
    h = History()
    ended = False
    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        if ended:
            raise HistoryParseError(lineno, "record after END")
        f = raw.split("\t")
        try:
            kind = f[0]
            if kind == "META":
                _arity(f, 3)
                h.meta[f[1]] = f[2]
            elif kind == "EVT":
                _arity(f, 8)
                proc = f[3]
                if proc not in PROCS:
                    raise ValueError(f"unknown procedure {proc!r}")
                ev = Event(_nat(f[1]), _thread(f[2]), proc, parse_tuple(f[4]),
                           parse_token(f[5]), _nat(f[6]), _opt(f[7]))
                if (ev.end is None) != (ev.output is None):
                    raise ValueError("output and end must be both present or both absent")
                if ev.end is not None and ev.end <= ev.start:
                    raise ValueError("end ticket must follow start ticket")
                h.events.append(ev)
            elif kind == "REP":
                _arity(f, 11)
                if f[2] not in ALL_LINES:
                    raise ValueError(f"unknown line label {f[2]!r}")
                if f[5] not in LAYERS:
                    raise ValueError(f"unknown layer {f[5]!r}")
                if f[8] not in EFFECTS:
                    raise ValueError(f"unknown effect {f[8]!r}")
                if not f[4].startswith("E"):
                    raise ValueError(f"bad event reference {f[4]!r}")
                h.reps.append(Rep(_nat(f[1]), f[2], _thread(f[3]), _nat(f[4][1:]), f[5],
                                  parse_tuple(f[6]), parse_token(f[7]), f[8],
                                  _nat(f[9]), _nat(f[10])))
            elif kind == "END":
                _arity(f, 3)
                if (_nat(f[1]), _nat(f[2])) != (len(h.events), len(h.reps)):
                    raise ValueError("record counts do not match END trailer")
                ended = True
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except HistoryParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise HistoryParseError(lineno, str(exc)) from None
    if not ended:
        raise HistoryParseError(lineno + 1, "missing END record (truncated history?)")
    ids = {e.id for e in h.events}
    if len(ids) != len(h.events):
        raise HistoryParseError(lineno, "duplicate event id")
    for r in h.reps:
        if r.event not in ids:
            raise HistoryParseError(lineno, f"rep {r.ticket} refers to unknown event E{r.event}")
    h.events.sort(key=lambda e: e.id)
    h.reps.sort(key=lambda r: r.key)
    return h


def _arity(f: list, n: int) -> None:
    if len(f) != n:
        raise ValueError(f"{f[0]} record needs {n} fields, got {len(f)}")


def _thread(s: str) -> int:
    if not s.startswith("T"):
        raise ValueError(f"bad thread reference {s!r}")
    return _nat(s[1:])
