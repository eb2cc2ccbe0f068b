"""Cell words, pointers and descriptor references.

A cell holds a 64-bit word whose two low bits are the tag. Plain values are
62-bit non-negative integers; descriptor references carry the slot of the
cell that stores the descriptor record.
"""
from __future__ import annotations

from dataclasses import dataclass

VAL, RDESC, MDESC = 0, 1, 2
TAG_BITS = 2
TAG_MASK = (1 << TAG_BITS) - 1
VAL_MAX = (1 << (64 - TAG_BITS)) - 1

CPTR, DPTR = "cptr", "dptr"

# status values stored in MCAS control cells
UNDEC, FAIL, SUCC = 0, 1, 2
STATUS_NAMES = {UNDEC: "Undec", FAIL: "Fail", SUCC: "Succ"}


class UsageError(ValueError):
    """A caller broke an operation's precondition."""


class CapacityError(RuntimeError):
    """The cell or descriptor arena is exhausted."""


@dataclass(frozen=True, slots=True)
class Ptr:
    kind: str
    slot: int

    def __str__(self) -> str:
        return f"{self.kind[0]}{self.slot}"


@dataclass(frozen=True, slots=True)
class Desc:
    tag: int
    slot: int

    def __str__(self) -> str:
        return f"{'r' if self.tag == RDESC else 'm'}{self.slot}"


class Unit:
    """The unit value returned by writes."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "tt"

    __str__ = __repr__

    def __reduce__(self):
        return (Unit, ())


TT = Unit()


@dataclass(frozen=True, slots=True)
class Entry:
    """One update entry of an mcas call."""

    pt: Ptr
    exp: int
    new: int

    def __str__(self) -> str:
        return f"{self.pt}:{self.exp}:{self.new}"


def is_val(w) -> bool:
    return type(w) is int and 0 <= w <= VAL_MAX


def is_rdesc(w) -> bool:
    return type(w) is Desc and w.tag == RDESC


def is_mdesc(w) -> bool:
    return type(w) is Desc and w.tag == MDESC


def check_val(v) -> int:
    if not is_val(v):
        raise UsageError(f"not a value: {v!r}")
    return v


def encode(w) -> int:
    if type(w) is int:
        if not 0 <= w <= VAL_MAX:
            raise UsageError(f"value out of range: {w}")
        return w << TAG_BITS
    if type(w) is Desc:
        return (w.slot << TAG_BITS) | w.tag
    raise UsageError(f"cannot store {w!r} in a cell")


def decode(x: int):
    tag = x & TAG_MASK
    if tag == VAL:
        return x >> TAG_BITS
    return Desc(tag, x >> TAG_BITS)


def same(a, b) -> bool:
    """Equality that keeps bools, ints and pointer kinds apart."""
    return type(a) is type(b) and a == b


def acquisition_order(entries) -> list:
    """Order in which MCAS installs its descriptor: by pointer slot."""
    return sorted(entries, key=lambda e: (e.pt.kind, e.pt.slot))
