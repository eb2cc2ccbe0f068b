import pytest

from mcasvis import harness as H
from mcasvis.core_mcas import McasMemory
from mcasvis.core_rdcss import RdcssMemory


@pytest.fixture
def mem():
    return McasMemory("helping")


@pytest.fixture
def opp_mem():
    return McasMemory("opportunistic")


@pytest.fixture
def rmem():
    return RdcssMemory()


def events_by_proc(h, proc):
    return [e for e in h.events if e.proc == proc]


def mcas_cfg(programs, init, strategy="helping", **kw):
    return H.WorkloadConfig(layer="mcas", strategy=strategy, programs=programs, init=init,
                            pointers=len(init), **kw)


def rdcss_cfg(programs, init, **kw):
    return H.WorkloadConfig(layer="rdcss", programs=programs, init=init,
                            pointers=len(init) // 2, **kw)
