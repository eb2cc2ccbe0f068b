"""Violation reports shared by the axiom and visibility checkers."""
from __future__ import annotations

WITNESS_CAP = 32


class AxiomReport:
    """Per-axiom violation counts (exact) and witnesses (capped)."""

    def __init__(self, kind: str, axioms: list):
        self.kind = kind
        self.axioms = list(axioms)
        self.counts = {a: 0 for a in self.axioms}
        self.witnesses = {a: [] for a in self.axioms}

    def fail(self, axiom: str, witness: str) -> None:
        self.counts[axiom] += 1
        if len(self.witnesses[axiom]) < WITNESS_CAP:
            self.witnesses[axiom].append(witness)

    @property
    def passed(self) -> bool:
        return not any(self.counts.values())

    def violations(self) -> dict:
        return {a: n for a, n in self.counts.items() if n}

    def render(self) -> str:
        out = [f"[{self.kind}] {'PASS' if self.passed else 'FAIL'}"]
        for a in self.axioms:
            n = self.counts[a]
            out.append(f"  {a}: {'pass' if n == 0 else f'{n} violation(s)'}")
            for w in self.witnesses[a]:
                out.append(f"    - {w}")
        return "\n".join(out) + "\n"

    def __repr__(self) -> str:
        return f"AxiomReport({self.kind!r}, violations={self.violations()})"
