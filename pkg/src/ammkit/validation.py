"""Pass/fail reports produced by the validators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EIG_TOL = 1e-9


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    """Ordered list of named checks.

    A report is truthy when every check passed.
    """

    subject: str = ""
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(passed), detail))
        return bool(passed)

    def extend(self, other: "ValidationReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.detail))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        lines = [f"[{self.subject}]"] if self.subject else []
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def min_eig(S: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``S``."""
    S = np.asarray(S, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def max_eig(S: np.ndarray) -> float:
    S = np.asarray(S, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
