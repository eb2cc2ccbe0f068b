"""Workload generation, schedulers and the end-to-end check pipeline.

Threads run the shipped algorithm generators. In ``threads`` mode each one
is driven on its own OS thread. In the simulated modes a cooperative
scheduler advances one thread at a time to its next scheduling point,
either picking at random from a seeded RNG (``sim-random``) or enumerating
every schedule depth-first (``sim-exhaustive``).
"""
from __future__ import annotations

import random
import sys
import threading
from dataclasses import dataclass, field

from . import axioms as A
from . import spans as S
from . import visibility as V
from .core_mcas import STRATEGIES, Mcas
from .core_rdcss import MUTATIONS, PRIM, REP, Arena, Ctx, Rdcss, RdcssDescriptor, drive
from .history import Clock, History, Recorder
from .oracle import DEFAULT_CAP, oracle
from .words import CPTR, DPTR, Entry, UsageError

MODES = ("threads", "sim-exhaustive", "sim-random")
LAYERS = ("mcas", "rdcss")
MCAS_MIX = {"mcas": 3, "mread": 2, "mwrite": 1, "malloc": 0}
RDCSS_MIX = {"rdcss": 3, "rread": 2, "rcas": 1, "rwrite": 1, "rread_c": 1, "rcas_c": 1,
             "rwrite_c": 0, "ralloc": 0}
DEFAULT_STEP_CAP = 400
DEFAULT_SCHEDULE_CAP = 200_000
EXHAUSTIVE_MAX_THREADS = 3


class ConfigError(UsageError):
    """A workload configuration is out of bounds."""


@dataclass
class WorkloadConfig:
    mode: str = "sim-random"
    layer: str = "mcas"
    threads: int = 2
    pointers: int = 2
    ops: int = 3
    mix: dict | None = None
    arity: int = 2
    values: int = 3
    strategy: str = "helping"
    seed: int = 0
    crash: bool = False
    mutation: str | None = None
    granularity: str | None = None
    step_cap: int = DEFAULT_STEP_CAP
    schedule_cap: int = DEFAULT_SCHEDULE_CAP
    programs: list | None = None   # explicit per-thread programs
    init: list | None = None       # explicit initial values

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.layer not in LAYERS:
            raise ConfigError(f"unknown layer {self.layer!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.mutation is not None and self.mutation not in MUTATIONS:
            raise ConfigError(f"unknown mutation {self.mutation!r}")
        if self.granularity not in (None, "rep", "primitive"):
            raise ConfigError(f"unknown granularity {self.granularity!r}")
        nthreads = len(self.programs) if self.programs is not None else self.threads
        if nthreads < 1 or self.pointers < 1 or self.ops < 0 or self.values < 1 or self.arity < 1:
            raise ConfigError("threads, pointers, values and arity must be positive")
        if self.mode == "sim-exhaustive" and nthreads > EXHAUSTIVE_MAX_THREADS:
            raise ConfigError(f"sim-exhaustive supports at most {EXHAUSTIVE_MAX_THREADS} threads")
        if self.crash and self.mode == "threads":
            raise ConfigError("crash mode needs a simulated scheduler")

    @property
    def effective_granularity(self) -> str:
        if self.granularity:
            return self.granularity
        if self.layer == "mcas" and self.mode == "sim-exhaustive":
            return "rep"
        return "primitive"

    def meta(self) -> dict:
        m = {"layer": self.layer, "mode": self.mode, "seed": self.seed,
             "threads": len(self.programs) if self.programs is not None else self.threads,
             "granularity": self.effective_granularity}
        if self.layer == "mcas":
            m["strategy"] = self.strategy
        if self.mutation:
            m["mutation"] = self.mutation
        if self.crash:
            m["crash"] = "on"
        return {k: str(v) for k, v in m.items()}


# ---------------------------------------------------------------- programs

def _pick(rng, mix):
    names = [k for k, w in mix.items() if w > 0]
    return rng.choices(names, weights=[mix[k] for k in names])[0]


def generate(cfg: WorkloadConfig):
    """Initial values and per-thread programs for a configuration."""
    rng = random.Random(cfg.seed)
    vals = range(cfg.values)
    if cfg.layer == "mcas":
        init = cfg.init or [rng.choice(vals) for _ in range(cfg.pointers)]
        if cfg.programs is not None:
            return init, cfg.programs
        mix = cfg.mix or MCAS_MIX
        progs = []
        for _ in range(cfg.threads):
            prog = []
            for _ in range(cfg.ops):
                op = _pick(rng, mix)
                if op == "mcas":
                    k = rng.randint(1, min(cfg.arity, cfg.pointers))
                    ptrs = rng.sample(range(cfg.pointers), k)
                    prog.append(("mcas", tuple((i, rng.choice(vals), rng.choice(vals)) for i in ptrs)))
                elif op == "mread":
                    prog.append(("mread", rng.randrange(cfg.pointers)))
                elif op == "mwrite":
                    prog.append(("mwrite", rng.randrange(cfg.pointers), rng.choice(vals)))
                else:
                    prog.append(("malloc", rng.choice(vals)))
            progs.append(prog)
        return init, progs
    # RDCSS: pointers control cells and pointers data cells
    init = cfg.init or [rng.choice(vals) for _ in range(2 * cfg.pointers)]
    if cfg.programs is not None:
        return init, cfg.programs
    mix = cfg.mix or RDCSS_MIX
    n = cfg.pointers
    progs = []
    for _ in range(cfg.threads):
        prog = []
        for _ in range(cfg.ops):
            op = _pick(rng, mix)
            c, d, v = rng.randrange(n), rng.randrange(n), lambda: rng.choice(vals)  # noqa: E731
            if op == "rdcss":
                prog.append(("rdcss", c, d, v(), v(), v()))
            elif op == "rread":
                prog.append(("rread", d))
            elif op == "rcas":
                prog.append(("rcas", d, v(), v()))
            elif op == "rwrite":
                prog.append(("rwrite", d, v()))
            elif op == "rread_c":
                prog.append(("rread_c", c))
            elif op == "rcas_c":
                prog.append(("rcas_c", c, v(), v()))
            elif op == "rwrite_c":
                prog.append(("rwrite_c", c, v()))
            else:
                prog.append(("ralloc", v(), rng.choice((CPTR, DPTR))))
        progs.append(prog)
    return init, progs


class _World:
    """One execution: arena, recorder, algorithms and per-thread generators."""

    def __init__(self, cfg: WorkloadConfig, init, progs):
        self.cfg = cfg
        self.rec = Recorder(Clock(), cfg.meta())
        self.arena = Arena(self.rec.clock)
        if cfg.layer == "mcas":
            self.algo = Mcas(self.arena, self.rec, cfg.strategy, cfg.mutation)
            setup = Ctx(0)
            self.data = [drive(self.algo.malloc(setup, v)) for v in init]
            self.ctrl = []
        else:
            self.algo = Rdcss(self.arena, self.rec, cfg.mutation)
            setup = Ctx(0)
            n = len(init) // 2
            self.ctrl = [drive(self.algo.ralloc(setup, v, CPTR)) for v in init[:n]]
            self.data = [drive(self.algo.ralloc(setup, v, DPTR)) for v in init[n:]]
        self.ctxs = [Ctx(t + 1) for t in range(len(progs))]
        self.gens = [self._program(ctx, prog) for ctx, prog in zip(self.ctxs, progs)]

    def _program(self, ctx, prog):
        a, D, C = self.algo, self.data, self.ctrl
        for op in prog:
            name = op[0]
            if name == "mcas":
                yield from a.mcas(ctx, [Entry(D[i], e, n) for i, e, n in op[1]])
            elif name == "mread":
                yield from a.mread(ctx, D[op[1]])
            elif name == "mwrite":
                yield from a.mwrite(ctx, D[op[1]], op[2])
            elif name == "malloc":
                yield from a.malloc(ctx, op[1])
            elif name == "rdcss":
                _, c, d, e1, e2, n2 = op
                yield from a.rdcss(ctx, RdcssDescriptor(C[c], D[d], e1, e2, n2))
            elif name in ("rread", "rread_c"):
                yield from getattr(a, name)(ctx, (D if name == "rread" else C)[op[1]])
            elif name in ("rcas", "rcas_c"):
                yield from getattr(a, name)(ctx, (D if name == "rcas" else C)[op[1]], op[2], op[3])
            elif name in ("rwrite", "rwrite_c"):
                yield from getattr(a, name)(ctx, (D if name == "rwrite" else C)[op[1]], op[2])
            elif name == "ralloc":
                yield from a.ralloc(ctx, op[1], op[2])
            else:
                raise ConfigError(f"unknown op {name!r}")


def _points(granularity):
    return (REP,) if granularity == "rep" else (PRIM, REP)


def _advance(gen, points):
    """Run a generator to its next scheduling point; False when it finished."""
    try:
        while True:
            if next(gen) in points:
                return True
    except StopIteration:
        return False


class _Sim:
    """Cooperative execution of a world under a chooser callback."""

    def __init__(self, world, cfg, victim=None):
        self.world = world
        self.points = _points(cfg.effective_granularity)
        # the cap bounds exhaustive exploration; random runs only guard against livelock
        self.step_cap = cfg.step_cap if cfg.mode == "sim-exhaustive" else max(cfg.step_cap, 1_000_000)
        self.victim = victim
        self.crashed = None
        self.on_choose = None

    def run(self, choose):
        w = self.world
        n = len(w.gens)
        # every thread first runs up to its first scheduling point
        live = [t for t in range(n) if _advance(w.gens[t], self.points)]
        steps = 0
        while live:
            if self.victim is not None and self.crashed is None and self.victim in live \
                    and w.ctxs[self.victim].published:
                self.crashed = self.victim
                live.remove(self.victim)
                if not live:
                    break
            if self.victim is not None and self.crashed is None and self.victim in live:
                t = self.victim
            else:
                if self.on_choose is not None:
                    self.on_choose(live)
                t = live[choose(len(live))]
            steps += 1
            if steps > self.step_cap:
                raise ConfigError(f"schedule exceeded the step cap ({self.step_cap})")
            if not _advance(w.gens[t], self.points):
                live.remove(t)
        return w.rec.history()


# two-thread workloads explored exhaustively for the oracle cross-check
CROSS_CHECK_WORKLOADS = {
    "mcas/mcas 1p": dict(layer="mcas", init=[0],
                         programs=[[("mcas", ((0, 0, 1),))], [("mcas", ((0, 0, 2),))]]),
    "mcas/mcas 2p": dict(layer="mcas", init=[0, 0],
                         programs=[[("mcas", ((0, 0, 1), (1, 0, 1)))], [("mcas", ((1, 0, 2),))]]),
    "mcas/mread 1p": dict(layer="mcas", init=[0],
                          programs=[[("mcas", ((0, 0, 1),))], [("mread", 0)]]),
    "mcas/mread 2p": dict(layer="mcas", init=[0, 0],
                          programs=[[("mcas", ((0, 0, 1), (1, 0, 1)))], [("mread", 1)]]),
    "mcas/mwrite 1p": dict(layer="mcas", init=[0],
                           programs=[[("mcas", ((0, 0, 1),))], [("mwrite", 0, 2)]]),
    "mcas/mwrite 2p": dict(layer="mcas", init=[0, 0],
                           programs=[[("mcas", ((0, 0, 1), (1, 0, 1)))], [("mwrite", 1, 2)]]),
    "rdcss/rdcss 1p": dict(layer="rdcss", init=[0, 0], pointers=1,
                           programs=[[("rdcss", 0, 0, 0, 0, 1)], [("rdcss", 0, 0, 0, 0, 2)]]),
    "rdcss/rdcss 2p": dict(layer="rdcss", init=[0, 0, 0, 0], pointers=2,
                           programs=[[("rdcss", 0, 0, 0, 0, 1)], [("rdcss", 1, 0, 0, 1, 2),
                                                                  ("rcas_c", 0, 0, 1)]]),
}


# smallest workloads on which exhaustive search exposes each shipped mutation
MUTATION_WORKLOADS = {
    "skip-undec-check": dict(layer="mcas", init=[0],
                             programs=[[("mcas", ((0, 0, 1),)), ("mwrite", 0, 0), ("mread", 0)],
                                       [("mread", 0)]]),
    "early-removal": dict(layer="mcas", init=[0], programs=[[("mcas", ((0, 0, 1),))]]),
    "skip-helping": dict(layer="rdcss", init=[0, 0], pointers=1,
                         programs=[[("rdcss", 0, 0, 0, 0, 1)], [("rread", 0)]]),
}


def stress_config(seed: int, layer: str = "mcas", strategy: str = "helping",
                  mode: str = "threads", ops: int = 8) -> WorkloadConfig:
    """The default stress workload: 2-8 threads, 1-8 pointers, MCAS arity 1-4."""
    rng = random.Random(seed)
    return WorkloadConfig(mode=mode, layer=layer, strategy=strategy, seed=seed,
                          threads=rng.randint(2, 8), pointers=rng.randint(1, 8),
                          arity=rng.randint(1, 4), ops=ops)


def crash_config(seed: int, strategy: str = "helping", helpers: int = 2) -> WorkloadConfig:
    """A crash scenario: thread 1 runs one MCAS whose expected values match
    the initial heap, so it installs its descriptor and is then paused; the
    helper threads touch the same pointers afterwards."""
    rng = random.Random(seed)
    npt = rng.randint(1, 2)
    init = [rng.randrange(3) for _ in range(npt)]
    victim = [("mcas", tuple((i, init[i], rng.randrange(3)) for i in range(npt)))]
    progs = [victim]
    for _ in range(helpers):
        prog = []
        for _ in range(rng.randint(1, 3)):
            i = rng.randrange(npt)
            kind = rng.choice(("mread", "mread", "mwrite", "mcas"))
            if kind == "mread":
                prog.append(("mread", i))
            elif kind == "mwrite":
                prog.append(("mwrite", i, rng.randrange(3)))
            else:
                prog.append(("mcas", ((i, rng.randrange(3), rng.randrange(3)),)))
        progs.append(prog)
    return WorkloadConfig(mode="sim-random", layer="mcas", strategy=strategy, seed=seed,
                          crash=True, programs=progs, init=init, pointers=npt)


def _crash_victim(cfg, progs):
    if cfg.programs is not None and cfg.crash:
        return 0
    if not cfg.crash:
        return None
    rng = random.Random(cfg.seed ^ 0x5EED)
    cands = [t for t, p in enumerate(progs) if any(op[0] in ("mcas", "rdcss") for op in p)]
    return rng.choice(cands) if cands else None


def run(cfg: WorkloadConfig) -> History:
    """One history: threads mode or one sim-random schedule."""
    cfg.validate()
    init, progs = generate(cfg)
    if cfg.mode == "sim-exhaustive":
        for _, h in explore(cfg):
            return h
    world = _World(cfg, init, progs)
    if cfg.mode == "threads":
        return _run_threads(world)
    rng = random.Random(cfg.seed)
    sim = _Sim(world, cfg, _crash_victim(cfg, progs))
    return sim.run(lambda k: rng.randrange(k))


def run_schedule(cfg: WorkloadConfig, schedule) -> History:
    """Run under a scripted schedule of 0-based thread indices.

    Each entry picks the thread that advances next; an entry naming a
    finished thread, or running past the script, picks the first live one.
    """
    cfg.validate()
    init, progs = generate(cfg)
    world = _World(cfg, init, progs)
    script = iter(schedule)
    state = {"live": None}

    def choose(k):
        want = next(script, None)
        live = state["live"]
        if want is not None and want in live:
            return live.index(want)
        return 0

    sim = _Sim(world, cfg, _crash_victim(cfg, progs))
    sim.on_choose = lambda live: state.__setitem__("live", list(live))
    return sim.run(choose)


def _run_threads(world) -> History:
    old = sys.getswitchinterval()
    sys.setswitchinterval(1e-6)
    errors = []

    def body(gen):
        try:
            drive(gen)
        except BaseException as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    try:
        ts = [threading.Thread(target=body, args=(g,)) for g in world.gens]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
    finally:
        sys.setswitchinterval(old)
    if errors:
        raise errors[0]
    return world.rec.history()


def explore(cfg: WorkloadConfig):
    """Yield (schedule, history) for every schedule, depth first, without duplicates."""
    cfg.validate()
    init, progs = generate(cfg)
    prefix = []
    count = 0
    while True:
        choices, options = [], []

        def choose(k):
            i = len(choices)
            c = prefix[i] if i < len(prefix) else 0
            choices.append(c)
            options.append(k)
            return c

        world = _World(cfg, init, progs)
        h = _Sim(world, cfg, _crash_victim(cfg, progs)).run(choose)
        count += 1
        yield tuple(choices), h
        i = len(choices) - 1
        while i >= 0 and choices[i] + 1 >= options[i]:
            i -= 1
        if i < 0:
            return
        if count >= cfg.schedule_cap:
            raise ConfigError(f"more than {cfg.schedule_cap} schedules")
        prefix = choices[:i] + [choices[i] + 1]


# ---------------------------------------------------------------- checking

@dataclass
class CheckResult:
    structure: str = ""
    spans: object = None
    axioms: object = None
    visibility: object = None
    committed: set = field(default_factory=set)
    linearization: object = None
    replay: object = None
    error: str = ""

    @property
    def passed(self) -> bool:
        return (not self.error and self.axioms is not None and self.axioms.passed
                and self.visibility.passed and self.linearization is not None
                and self.linearization.eq4_holds and self.replay.sound)

    def render(self) -> str:
        out = [f"structure: {self.structure}"]
        if self.axioms is not None:
            out.append(self.axioms.render().rstrip("\n"))
        if self.visibility is not None:
            out.append(self.visibility.render().rstrip("\n"))
        out.append(f"committed: {len(self.committed)} events")
        if self.linearization is not None:
            lin = self.linearization
            out.append("linearization: " + " ".join(f"E{e}" for e in lin.order))
            out.append("eq4: " + ("holds" if lin.eq4_holds else "; ".join(lin.eq4_violations)))
        if self.replay is not None:
            out.append(self.replay.render())
        if self.error:
            out.append(f"error: {self.error}")
        out.append("RESULT: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(out) + "\n"


def check(h: History) -> CheckResult:
    """Extraction, span axioms, visibility axioms, linearization and replay."""
    res = CheckResult()
    st = S.extract(h)
    res.structure, res.spans = st.kind, st
    rel = V.build_visibility(st, h)
    res.axioms = A.check(st, h, rel)
    res.committed = V.committed_set(rel)
    res.visibility = V.check_visibility_axioms(rel, res.committed)
    try:
        res.linearization = V.linearize(rel, res.committed)
    except V.LinearizationError as exc:
        res.error = str(exc)
        return res
    res.replay = V.replay(res.linearization.order, h)
    return res


def run_oracle(h: History, cap: int = DEFAULT_CAP):
    return oracle(h, cap)
