"""Command line: ``run``, ``check`` and ``oracle``.

Exit codes: 0 pass, 1 usage or parse error, 2 violation.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import harness as H
from .history import HistoryParseError, dumps, loads
from .oracle import LINEARIZABLE, NOT_LINEARIZABLE
from .spans import StructureMismatch
from .words import CapacityError, UsageError

OK, USAGE, VIOLATION = 0, 1, 2


def _mix(text: str) -> dict:
    out = {}
    for part in text.split(","):
        name, _, weight = part.partition("=")
        try:
            out[name.strip()] = float(weight) if weight else 1.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad weight in {part!r}") from None
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcasvis", description="MCAS/RDCSS linearizability checker")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="execute a workload and record its history")
    r.add_argument("--mode", choices=H.MODES, default="sim-random")
    r.add_argument("--layer", choices=H.LAYERS, default="mcas")
    r.add_argument("--threads", type=int, default=2)
    r.add_argument("--pointers", type=int, default=2)
    r.add_argument("--ops", type=int, default=3)
    r.add_argument("--mix", type=_mix, default=None, help="e.g. mcas=3,mread=2,mwrite=1")
    r.add_argument("--arity", type=int, default=2, help="maximum mcas arity")
    r.add_argument("--values", type=int, default=3)
    r.add_argument("--strategy", choices=("helping", "opportunistic"), default="helping")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--crash", action="store_true")
    r.add_argument("--mutate", default=None, metavar="ID")
    r.add_argument("--granularity", choices=("rep", "primitive"), default=None)
    r.add_argument("--step-cap", type=int, default=H.DEFAULT_STEP_CAP)
    r.add_argument("-o", "--output", required=True, metavar="FILE",
                   help="history file; a directory of files for sim-exhaustive")

    c = sub.add_parser("check", help="run the full check pipeline on a history file")
    c.add_argument("file")
    c.add_argument("--report", metavar="FILE")

    o = sub.add_parser("oracle", help="brute-force linearizability of a small history")
    o.add_argument("file")
    o.add_argument("--cap", type=int, default=8)
    return p


def _read(path):
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def cmd_run(a) -> int:
    cfg = H.WorkloadConfig(mode=a.mode, layer=a.layer, threads=a.threads, pointers=a.pointers,
                           ops=a.ops, mix=a.mix, arity=a.arity, values=a.values,
                           strategy=a.strategy, seed=a.seed, crash=a.crash, mutation=a.mutate,
                           granularity=a.granularity, step_cap=a.step_cap)
    if a.mode == "sim-exhaustive":
        os.makedirs(a.output, exist_ok=True)
        n = 0
        for n, (_, h) in enumerate(H.explore(cfg), 1):
            with open(os.path.join(a.output, f"schedule-{n:06d}.hist"), "w", encoding="utf-8") as f:
                f.write(dumps(h))
        print(f"{n} schedules written to {a.output}")
        return OK
    h = H.run(cfg)
    with open(a.output, "w", encoding="utf-8") as f:
        f.write(dumps(h))
    print(f"{len(h.events)} events, {len(h.reps)} reps written to {a.output}")
    return OK


def cmd_check(a) -> int:
    res = H.check(_read(a.file))
    text = res.render()
    sys.stdout.write(text)
    if a.report:
        with open(a.report, "w", encoding="utf-8") as f:
            f.write(text)
    return OK if res.passed else VIOLATION


def cmd_oracle(a) -> int:
    res = H.run_oracle(_read(a.file), a.cap)
    print(res.render())
    if res.verdict == LINEARIZABLE:
        return OK
    return VIOLATION if res.verdict == NOT_LINEARIZABLE else USAGE


def main(argv=None) -> int:
    parser = _parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else USAGE
    try:
        return {"run": cmd_run, "check": cmd_check, "oracle": cmd_oracle}[a.cmd](a)
    except (HistoryParseError, StructureMismatch, UsageError, CapacityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
