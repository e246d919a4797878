"""Pass/fail records shared by all checkers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    hard: bool = True

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.hard else "WARN")
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: measured={self.measured:.3e} tol={self.tolerance:.1e}{extra}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": float(self.measured),
                "tolerance": float(self.tolerance), "detail": self.detail, "hard": self.hard}


@dataclass
class Report:
    title: str = ""
    checks: List[CheckResult] = field(default_factory=list)

    def add(self, name, passed, measured, tolerance, detail="", hard=True) -> CheckResult:
        res = CheckResult(name, bool(passed), float(measured), float(tolerance), detail, hard)
        self.checks.append(res)
        return res

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(CheckResult(prefix + c.name, c.passed, c.measured,
                                           c.tolerance, c.detail, c.hard))

    @property
    def passed(self) -> bool:
        """True when every hard check passed; soft checks only warn."""
        return all(c.passed for c in self.checks if c.hard)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if c.hard and not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> List[str]:
        return [c.line() for c in self.checks]

    def to_dict(self) -> dict:
        return {"title": self.title, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}
