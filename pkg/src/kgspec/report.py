from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed}


@dataclass
class Report:
    """Outcome of one verification: scalar checks plus free-form tables."""

    name: str
    params: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def check(self, name: str, value: float, tol: float, passed: bool | None = None) -> Check:
        """Record ``value <= tol`` (or an explicit verdict)."""
        value = float(value)
        c = Check(name, value, tol, value <= tol if passed is None else bool(passed))
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "params": self.params,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "tables": self.tables,
            "notes": self.notes,
        }
