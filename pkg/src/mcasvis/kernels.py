"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``MCASVIS_PURE=1`` to force the pure-Python kernels.
"""
import os

from . import _kernels_py

IMPLEMENTATION = "python"
if os.environ.get("MCASVIS_PURE") != "1":
    try:
        from . import _ckernels as _impl
        IMPLEMENTATION = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
else:
    _impl = _kernels_py

closure = _impl.closure
before_matrix = _impl.before_matrix
topo_sort = _impl.topo_sort
