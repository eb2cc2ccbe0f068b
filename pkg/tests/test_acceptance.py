"""Acceptance criteria 1-8, one test each, each printing a single PASS/FAIL line."""
import time

import pytest

from mcasvis import axioms as A
from mcasvis import harness as H
from mcasvis import spans as S
from mcasvis import visibility as V
from mcasvis.history import dumps, loads
from mcasvis.oracle import LINEARIZABLE, oracle

MCAS_PROCS = ["mcas", "mread", "mwrite", "malloc"]
RDCSS_PROCS = ["rdcss", "rread", "rcas", "rwrite", "rread_c", "rcas_c", "rwrite_c", "ralloc"]


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    return emit


def _stress(seeds, layer, strategy):
    """Half real-thread runs, half seeded random simulations."""
    out = []
    for seed in seeds:
        mode = "threads" if seed % 2 == 0 else "sim-random"
        out.append(H.run(H.stress_config(seed, layer, strategy, mode)))
    return out


def _axioms(hs):
    bad = []
    results = []
    for h in hs:
        st = S.extract(h)
        rel = V.build_visibility(st, h)
        rep = A.check(st, h, rel)
        results.append((h, st, rel))
        if not rep.passed:
            bad.append(rep.render())
    return results, bad


@pytest.fixture(scope="module")
def stress():
    """Histories and timing for criteria 2 and 3, reused by 4 and 7."""
    data = {}
    t = time.perf_counter()
    hs = _stress(range(1000), "mcas", "helping") + _stress(range(500), "rdcss", "helping")
    data["c2"] = _axioms(hs) + (time.perf_counter() - t,)
    t = time.perf_counter()
    hs = _stress(range(500), "mcas", "opportunistic")
    data["c3"] = _axioms(hs) + (time.perf_counter() - t,)
    return data


def test_criterion_1_sequential_conformance(report):
    t = time.perf_counter()
    failures, counts = [], {}
    for proc in MCAS_PROCS + RDCSS_PROCS:
        layer = "mcas" if proc in MCAS_PROCS else "rdcss"
        base = H.MCAS_MIX if layer == "mcas" else H.RDCSS_MIX
        mix = {k: (4 if k == proc else 1) for k in base}
        counts[proc] = 0
        for seed in range(100):
            cfg = H.WorkloadConfig(layer=layer, threads=1, ops=6, pointers=2, mix=mix, seed=seed)
            h = H.run(cfg)
            counts[proc] += sum(e.proc == proc for e in h.events if e.thread > 0)
            order = [e.id for e in sorted(h.events, key=lambda e: e.start)]
            rep = V.replay(order, h)
            if not rep.sound:
                failures.append(f"{proc} seed {seed}: {rep.render()}")
    dt = time.perf_counter() - t
    ok = not failures and min(counts.values()) >= 100 and dt < 5
    report(1, ok, f"12 procedures x 100 programs, {len(failures)} mismatches, {dt:.2f}s < 5s")
    assert not failures, failures[:3]
    assert min(counts.values()) >= 100, counts
    assert dt < 5


def test_criterion_2_span_axioms(stress, report):
    results, bad, dt = stress["c2"]
    ok = len(results) == 1500 and not bad and dt < 120
    report(2, ok, f"1000 helping MCAS + 500 RDCSS histories, {len(bad)} failing, {dt:.1f}s < 120s")
    assert not bad, bad[0]
    assert dt < 120


def test_criterion_3_opportunism_axioms(stress, report):
    results, bad, dt = stress["c3"]
    kinds = {st.kind for _, st, _ in results}
    ok = len(results) == 500 and not bad and kinds == {S.MCAS_OPP} and dt < 60
    report(3, ok, f"500 opportunistic histories, {len(bad)} failing, {dt:.1f}s < 60s")
    assert kinds == {S.MCAS_OPP}
    assert not bad, bad[0]
    assert dt < 60


def test_criterion_4_end_to_end(stress, report):
    failures = []
    n = 0
    for key in ("c2", "c3"):
        for h, st, rel in stress[key][0]:
            n += 1
            xhat = V.committed_set(rel)
            vis = V.check_visibility_axioms(rel, xhat)
            try:
                lin = V.linearize(rel, xhat)
            except V.LinearizationError as exc:
                failures.append(str(exc))
                continue
            rep = V.replay(lin.order, h)
            if not (vis.passed and lin.eq4_holds and rep.sound):
                failures.append(vis.render() + "; ".join(lin.eq4_violations) + rep.render())
    report(4, not failures, f"{n} histories, {len(failures)} failing")
    assert not failures, failures[0]


def test_criterion_5_oracle_cross_check(report):
    n = agree = 0
    failures = []
    for name, w in H.CROSS_CHECK_WORKLOADS.items():
        strategies = ("helping", "opportunistic") if w["layer"] == "mcas" else ("helping",)
        for strategy in strategies:
            cfg = H.WorkloadConfig(mode="sim-exhaustive", strategy=strategy, **w)
            for sched, h in H.explore(cfg):
                n += 1
                res = H.check(h)
                o = oracle(h)
                if res.passed and o.verdict == LINEARIZABLE and o.witness is not None:
                    agree += 1
                else:
                    failures.append(f"{name}/{strategy} schedule {sched}: checker "
                                    f"{'pass' if res.passed else 'fail'}, {o.render()}")
    report(5, n > 0 and agree == n, f"{agree}/{n} schedules replay-sound and oracle-linearizable")
    assert n > 0 and not failures, failures[:3]


def test_criterion_6_mutations_detected(report):
    caught = {}
    for m in sorted(H.MUTATIONS):
        cfg = H.WorkloadConfig(mode="sim-exhaustive", mutation=m, **H.MUTATION_WORKLOADS[m])
        assert cfg.step_cap == H.DEFAULT_STEP_CAP
        caught[m] = sum(not H.check(h).passed for _, h in H.explore(cfg))
    ok = len(caught) >= 3 and all(caught.values())
    report(6, ok, ", ".join(f"{m}: {k} violating schedules" for m, k in caught.items()))
    assert len(caught) >= 3
    assert all(caught.values()), caught


def test_criterion_7_determinism_and_format(stress, report):
    diffs = 0
    for seed in range(50):
        for layer in ("mcas", "rdcss"):
            for strategy in ("helping", "opportunistic"):
                cfg = dict(mode="sim-random", layer=layer, strategy=strategy, seed=seed,
                           threads=3, ops=4)
                a = dumps(H.run(H.WorkloadConfig(**cfg)))
                b = dumps(H.run(H.WorkloadConfig(**cfg)))
                diffs += a != b
    lossy = 0
    total = 0
    for key in ("c2", "c3"):
        for h, _, _ in stress[key][0]:
            total += 1
            text = dumps(h)
            back = loads(text)
            lossy += not (back == h and dumps(back) == text)
    ok = diffs == 0 and lossy == 0
    report(7, ok, f"200 repeated sim runs, {diffs} differ; {total} round trips, {lossy} lossy")
    assert diffs == 0 and lossy == 0


def test_criterion_8_crash_completion(report):
    completed = 0
    failures = []
    for strategy in ("helping", "opportunistic"):
        for seed in range(20):
            h = H.run(H.crash_config(seed, strategy))
            res = H.check(h)
            if not res.passed:
                failures.append(res.render())
                continue
            paused = [e.id for e in h.events if not e.terminated]
            if any(x in res.committed and x in res.replay.outputs for x in paused):
                completed += 1
    ok = not failures and completed >= 20
    report(8, ok, f"40 crash scenarios, {completed} paused events committed and completed, "
                  f"{len(failures)} failing")
    assert not failures, failures[0]
    assert completed >= 20
