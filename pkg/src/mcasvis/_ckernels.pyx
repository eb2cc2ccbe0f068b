# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled graph kernels; same contracts as the pure-Python module."""
import heapq

from libc.stdint cimport uint64_t
from libc.stdlib cimport calloc, free


cdef int _words(Py_ssize_t n):
    return <int>((n + 63) // 64)


cdef void _load(list rows, uint64_t *buf, Py_ssize_t n, int w):
    cdef Py_ssize_t i
    cdef int k
    cdef bytes raw
    cdef const unsigned char *p
    for i in range(n):
        raw = (<object>rows[i]).to_bytes(w * 8, "little")
        p = raw
        for k in range(w):
            buf[i * w + k] = (<uint64_t *>(p + 8 * k))[0]


cdef list _store(uint64_t *buf, Py_ssize_t n, int w):
    cdef Py_ssize_t i
    out = []
    for i in range(n):
        out.append(int.from_bytes((<char *>(buf + i * w))[:w * 8], "little"))
    return out


def closure(list rows):
    cdef Py_ssize_t n = len(rows), i, k
    cdef int w = _words(n), j
    if n == 0:
        return []
    cdef uint64_t *buf = <uint64_t *>calloc(n * w, sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    cdef uint64_t bit
    cdef uint64_t *rk
    cdef uint64_t *ri
    try:
        _load(rows, buf, n, w)
        for k in range(n):
            rk = buf + k * w
            bit = (<uint64_t>1) << (k & 63)
            for i in range(n):
                ri = buf + i * w
                if ri[k >> 6] & bit:
                    for j in range(w):
                        ri[j] |= rk[j]
        return _store(buf, n, w)
    finally:
        free(buf)


def before_matrix(list starts, list ends):
    cdef Py_ssize_t n = len(starts), m = len(ends), i, j
    cdef int w = _words(m)
    if n == 0:
        return []
    order = sorted((e, j) for j, e in enumerate(ends) if e is not None)
    cdef Py_ssize_t q = len(order), pos
    cdef uint64_t *acc = <uint64_t *>calloc(max(w, 1), sizeof(uint64_t))
    if acc == NULL:
        raise MemoryError()
    idx = sorted(range(n), key=lambda i: starts[i])
    out = [0] * n
    pos = 0
    try:
        for i in idx:
            s = starts[i]
            while pos < q and order[pos][0] < s:
                j = order[pos][1]
                acc[j >> 6] |= (<uint64_t>1) << (j & 63)
                pos += 1
            out[i] = int.from_bytes((<char *>acc)[:w * 8], "little") if w else 0
        return out
    finally:
        free(acc)


def topo_sort(list preds, list keys):
    cdef Py_ssize_t n = len(preds), i, j
    cdef int w = _words(n), k
    if n == 0:
        return []
    cdef uint64_t *buf = <uint64_t *>calloc(n * w, sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    cdef uint64_t word
    succs = [[] for _ in range(n)]
    indeg = [0] * n
    try:
        _load(preds, buf, n, w)
        for i in range(n):
            for k in range(w):
                word = buf[i * w + k]
                while word:
                    j = k * 64 + _ctz(word)
                    word &= word - 1
                    if j == i:
                        return None
                    succs[j].append(i)
                    indeg[i] += 1
    finally:
        free(buf)
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


cdef inline int _ctz(uint64_t x):
    cdef int c = 0
    while not (x & 1):
        x >>= 1
        c += 1
    return c
