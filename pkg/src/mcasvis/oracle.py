"""Brute-force linearizability oracle for small histories.

Enumerates every order of the events that respects real time, optionally
including unterminated events, and replays it against a sequential heap
model written independently of :mod:`mcasvis.visibility`.
"""
from __future__ import annotations

from dataclasses import dataclass

from .history import History
from .words import TT, Ptr

DEFAULT_CAP = 8
LINEARIZABLE, NOT_LINEARIZABLE, TOO_LARGE = "linearizable", "not", "too-large"


@dataclass
class OracleResult:
    verdict: str
    witness: list | None = None

    def render(self) -> str:
        if self.verdict == LINEARIZABLE:
            return "oracle: linearizable, witness " + " ".join(f"E{e}" for e in self.witness)
        return f"oracle: {self.verdict}"


def _eq(a, b) -> bool:
    return type(a) is type(b) and a == b


class _Model:
    """Sequential heap semantics over a frozen (sorted tuple) heap."""

    @staticmethod
    def run(heap: tuple, proc: str, inp: tuple, out, fresh):
        """Return (output, new heap) or None when the step is not enabled."""
        h = dict(heap)
        if proc in ("malloc", "ralloc"):
            p = out if out is not None else fresh
            if p in h:
                return None
            h[p] = inp[0]
            return p, tuple(sorted(h.items(), key=lambda kv: (kv[0].kind, kv[0].slot)))
        key = inp[1] if proc == "rdcss" else (inp[0].pt if proc == "mcas" else inp[0])
        if proc == "mcas":
            if any(e.pt not in h for e in inp):
                return None
            ok = all(_eq(h[e.pt], e.exp) for e in inp)
            if ok:
                for e in inp:
                    h[e.pt] = e.new
            res = ok
        else:
            if key not in h:
                return None
            cur = h[key]
            if proc in ("mread", "rread", "rread_c"):
                res = cur
            elif proc in ("mwrite", "rwrite", "rwrite_c"):
                h[key] = inp[1]
                res = TT
            elif proc in ("rcas", "rcas_c"):
                if _eq(cur, inp[1]):
                    h[key] = inp[2]
                res = cur
            elif proc == "rdcss":
                pt1, _, exp1, exp2, new2 = inp
                if _eq(cur, exp2):
                    if pt1 not in h:
                        return None
                    if _eq(h[pt1], exp1):
                        h[key] = new2
                res = cur
            else:
                return None
        return res, tuple(sorted(h.items(), key=lambda kv: (kv[0].kind, kv[0].slot)))


def oracle(h: History, cap: int = DEFAULT_CAP) -> OracleResult:
    evs = list(h.events)
    if len(evs) > cap:
        return OracleResult(TOO_LARGE)
    n = len(evs)
    full = (1 << n) - 1
    must = sum(1 << i for i, e in enumerate(evs) if e.terminated)
    fresh = [Ptr("dptr" if e.proc == "malloc" else (e.input[1] if e.proc == "ralloc" else "dptr"),
                 (1 << 62) + i) for i, e in enumerate(evs)]
    dead = set()

    def enabled(i, left):
        s = evs[i].start
        for j in range(n):
            if left >> j & 1 and j != i and evs[j].terminated and evs[j].end < s:
                return False
        return True

    def dfs(left, heap, order):
        if not (left & must):
            return order
        key = (left, heap)
        if key in dead:
            return None
        for i in range(n):
            if not (left >> i & 1) or not enabled(i, left):
                continue
            e = evs[i]
            res = _Model.run(heap, e.proc, e.input, e.output if e.terminated else None, fresh[i])
            if res is None:
                continue
            out, nheap = res
            if e.terminated and not _eq(out, e.output):
                continue
            found = dfs(left & ~(1 << i), nheap, order + [e.id])
            if found is not None:
                return found
        # unterminated events may also be left out entirely
        for i in range(n):
            if left >> i & 1 and not evs[i].terminated:
                found = dfs(left & ~(1 << i), heap, order)
                if found is not None:
                    return found
        dead.add(key)
        return None

    w = dfs(full, (), [])
    return OracleResult(LINEARIZABLE, w) if w is not None else OracleResult(NOT_LINEARIZABLE)
