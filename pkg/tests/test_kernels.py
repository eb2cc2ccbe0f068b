import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from mcasvis import _kernels_py as py
from mcasvis import kernels

try:
    from mcasvis import _ckernels as cy
except ImportError:  # pragma: no cover - depends on the build
    cy = None

graphs = st.integers(1, 24).flatmap(
    lambda n: st.lists(st.integers(0, (1 << n) - 1), min_size=n, max_size=n))


def _reach(rows):
    """Reachability by repeated search, independent of the kernels."""
    n = len(rows)
    out = []
    for i in range(n):
        seen, stack = 0, [j for j in range(n) if rows[i] >> j & 1]
        while stack:
            j = stack.pop()
            if seen >> j & 1:
                continue
            seen |= 1 << j
            stack.extend(k for k in range(n) if rows[j] >> k & 1)
        out.append(seen)
    return out


@given(graphs)
def test_closure_matches_search(rows):
    assert py.closure(rows) == _reach(rows)


@given(st.lists(st.tuples(st.integers(0, 50), st.one_of(st.none(), st.integers(0, 50))),
                max_size=20))
def test_before_matrix(intervals):
    starts = [s for s, _ in intervals]
    ends = [e for _, e in intervals]
    rows = py.before_matrix(starts, ends)
    for i, s in enumerate(starts):
        for j, e in enumerate(ends):
            assert bool(rows[i] >> j & 1) == (e is not None and e < s)


@given(graphs)
def test_topo_sort_respects_order_or_reports_cycle(preds):
    n = len(preds)
    order = py.topo_sort(preds, list(range(n)))
    cyclic = any(r >> i & 1 for i, r in enumerate(_reach(preds)))
    if cyclic:
        assert order is None
    else:
        pos = {x: k for k, x in enumerate(order)}
        assert sorted(order) == list(range(n))
        for i, row in enumerate(preds):
            for j in range(n):
                if row >> j & 1:
                    assert pos[j] < pos[i]


@pytest.mark.skipif(cy is None, reason="compiled kernels not built")
@settings(max_examples=200)
@given(graphs, st.randoms(use_true_random=False))
def test_compiled_kernels_agree_with_python(rows, rnd):
    n = len(rows)
    keys = [(rnd.randrange(5), i) for i in range(n)]
    assert cy.closure(rows) == py.closure(rows)
    assert cy.topo_sort(rows, keys) == py.topo_sort(rows, keys)
    starts = [rnd.randrange(30) for _ in range(n)]
    ends = [rnd.choice([None, rnd.randrange(30)]) for _ in range(n)]
    assert cy.before_matrix(starts, ends) == py.before_matrix(starts, ends)


def test_implementation_selection():
    assert kernels.IMPLEMENTATION in ("cython", "python")
    env = dict(os.environ, MCASVIS_PURE="1")
    out = subprocess.run([sys.executable, "-c",
                          "from mcasvis import kernels; print(kernels.IMPLEMENTATION)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
