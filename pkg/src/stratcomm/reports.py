"""Audit result container shared by the audit entry points."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class AuditReport:
    kind: str
    passed: bool
    max_deviation: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "details": self.details,
        }
