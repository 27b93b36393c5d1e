"""Check reports and their canonical serialization."""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Tuple

from nelson_workbench.errors import EXIT_BUDGET, EXIT_CHECK_FAILED, EXIT_OK


@dataclass(frozen=True)
class Check:
    """One verified property; ``witness`` says what went wrong when it fails."""
    name: str
    passed: bool
    witness: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class Section:
    """
    A named group of checks, with free-form facts in ``notes``.

    Notes record observed values (sizes, truth values) that are not
    pass/fail by themselves. Items left out for the budget go in
    ``skipped``; a section with skipped items never passes.
    """
    name: str
    checks: List[Check] = field(default_factory=list)
    notes: Dict[str, str] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)

    def add(self, name: str, passed: bool, witness: Optional[str] = None) -> bool:
        self.checks.append(Check(name, bool(passed), None if passed else witness))
        return bool(passed)

    def note(self, key: str, value: Any) -> None:
        self.notes[key] = value if isinstance(value, str) else render_label(value)

    def extend(self, other: "Section", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.witness))
        for k, v in other.notes.items():
            self.notes[prefix + k] = v
        self.skipped.extend(prefix + s for s in other.skipped)

    def skip(self, item: str, reason: str) -> None:
        self.skipped.append(item)
        self.notes[f"skipped {item}"] = reason

    @property
    def passed(self) -> bool:
        return not self.skipped and all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "notes": dict(self.notes),
            "skipped": list(self.skipped),
        }


@dataclass
class Report:
    """Sections in the order they were run."""
    title: str
    sections: List[Section] = field(default_factory=list)

    def add(self, section: Section) -> Section:
        self.sections.append(section)
        return section

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.sections)

    def summary(self) -> Dict[str, int]:
        checks = [c for s in self.sections for c in s.checks]
        return {
            "checks": len(checks),
            "failed": sum(1 for c in checks if not c.passed),
            "sections": len(self.sections),
            "skipped": sum(len(s.skipped) for s in self.sections),
        }

    def exit_code(self) -> int:
        """0 when everything ran and passed, 1 on a failed check, else 3 for skipped items."""
        s = self.summary()
        if s["failed"]:
            return EXIT_CHECK_FAILED
        if s["skipped"]:
            return EXIT_BUDGET
        return EXIT_OK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "summary": self.summary(),
            "sections": [s.to_dict() for s in self.sections],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    def to_human(self) -> str:
        """Plain-text rendering, derived from ``to_dict``."""
        data = self.to_dict()
        status = "PASS" if data["passed"] else "FAIL"
        s = data["summary"]
        head = f"{data['title']}: {status} ({s['checks'] - s['failed']}/{s['checks']} checks)"
        if s["skipped"]:
            head += f", {s['skipped']} skipped over budget"
        lines = [head]
        for sec in data["sections"]:
            mark = "ok " if sec["passed"] else "FAIL"
            lines.append(f"  [{mark}] {sec['name']}")
            for key in sorted(sec["notes"]):
                lines.append(f"        {key}: {sec['notes'][key]}")
            for chk in sec["checks"]:
                if not chk["passed"]:
                    lines.append(f"        x {chk['name']}: {chk.get('witness', '')}")
        return "\n".join(lines) + "\n"


def render_label(label: Hashable) -> str:
    """Canonical text for an element label (nested tuples, strings, ints)."""
    if isinstance(label, str):
        return label
    if isinstance(label, bool):
        return "true" if label else "false"
    if isinstance(label, tuple):
        return "(" + ", ".join(render_label(x) for x in label) + ")"
    if isinstance(label, frozenset):
        return "{" + ", ".join(sorted(render_label(x) for x in label)) + "}"
    return str(label)


def render_parts(parts: Dict[str, List[Hashable]]) -> str:
    """Render {object: [labels]} as produced by ``Subobject.labels``."""
    items: List[Tuple[str, str]] = [
        (obj, "{" + ", ".join(render_label(l) for l in ls) + "}")
        for obj, ls in parts.items()
    ]
    if len(items) == 1:
        return items[0][1]
    return "; ".join(f"{o}: {s}" for o, s in items)
