"""Verification reports shared by every checking operation."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple


@dataclass(frozen=True)
class Check:
    """One named pass/fail result, optionally pinned to a level and location"""
    name: str
    passed: bool
    level: Optional[int] = None
    location: Optional[Tuple[Any, ...]] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.level is not None:
            out["level"] = self.level
        if self.location is not None:
            out["location"] = [_plain(x) for x in self.location]
        if self.detail:
            out["detail"] = self.detail
        return out


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(x) for x in value]
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, (str, bool)) or value is None:
        return value
    return str(value)


@dataclass
class Report:
    """Ordered collection of checks plus free-form data"""
    title: str
    checks: List[Check] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)

    def add(self, name: str, passed: bool, level: Optional[int] = None,
            location: Optional[Tuple[Any, ...]] = None, detail: str = "") -> Check:
        check = Check(name, bool(passed), level, location, detail)
        self.checks.append(check)
        return check

    def extend(self, other: "Report") -> None:
        self.checks.extend(other.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def first_failure(self) -> Optional[Check]:
        for c in self.checks:
            if not c.passed:
                return c
        return None

    def named(self, name: str) -> List[Check]:
        return [c for c in self.checks if c.name == name]

    def render(self) -> str:
        """Human-readable listing, one line per check"""
        lines = [f"{self.title}:"]
        for c in self.checks:
            mark = "✓" if c.passed else "✗"
            where = f" [level {c.level}]" if c.level is not None else ""
            line = f"  {mark} {c.name}{where}"
            if c.location is not None and not c.passed:
                line += f" at {c.location}"
            if c.detail:
                line += f" ({c.detail})"
            lines.append(line)
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }
