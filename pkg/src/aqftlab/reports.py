"""Named numerical checks and their JSON form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    value: float
    tol: float
    relation: str = ""  # what is being compared, in words
    mode: str = "below"  # "below": value < tol passes; "above": value > tol passes; "true": value is a flag
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.mode == "true":
            return bool(self.value)
        if not math.isfinite(self.value):
            return False
        if self.mode == "above":
            return self.value > self.tol
        return self.value < self.tol

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "relation": self.relation,
            "value": float(self.value) if self.mode != "true" else bool(self.value),
            "tolerance": self.tol,
            "mode": self.mode,
            "passed": self.passed,
            **({"detail": self.detail} if self.detail else {}),
        }


@dataclass
class Report:
    name: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def add(self, name, value, tol, relation="", mode="below", **detail) -> Check:
        c = Check(name, float(value) if mode != "true" else bool(value), tol, relation, mode, detail)
        self.checks.append(c)
        return c

    def extend(self, other: "Report", prefix: str = "") -> "Report":
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.value, c.tol, c.relation, c.mode, c.detail))
        self.info.update({prefix + k: v for k, v in other.info.items()})
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            **({"info": self.info} if self.info else {}),
        }
