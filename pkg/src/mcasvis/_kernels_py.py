"""Pure-Python graph kernels over int bitsets (row i = bitset of successors)."""
from __future__ import annotations

import heapq


def closure(rows: list) -> list:
    """Transitive (non-reflexive) closure of a relation given as bitset rows."""
    n = len(rows)
    out = list(rows)
    for k in range(n):
        bit = 1 << k
        rk = out[k]
        if not rk:
            continue
        for i in range(n):
            if out[i] & bit:
                out[i] |= rk
    return out


def before_matrix(starts: list, ends: list) -> list:
    """Row i holds every j with ends[j] < starts[i]; None ends never qualify."""
    order = sorted((e, j) for j, e in enumerate(ends) if e is not None)
    rows = []
    for s in starts:
        acc = 0
        for e, j in order:
            if e >= s:
                break
            acc |= 1 << j
        rows.append(acc)
    return rows


def topo_sort(preds: list, keys: list):
    """Kahn's algorithm picking the smallest key among ready nodes.

    Returns the order, or None when the relation has a cycle.
    """
    n = len(preds)
    succs = [[] for _ in range(n)]
    indeg = [0] * n
    for i, row in enumerate(preds):
        r = row
        while r:
            low = r & -r
            j = low.bit_length() - 1
            r ^= low
            if j != i:
                succs[j].append(i)
                indeg[i] += 1
            else:
                return None
    ready = [(keys[i], i) for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, i = heapq.heappop(ready)
        order.append(i)
        for j in succs[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, (keys[j], j))
    return order if len(order) == n else None
