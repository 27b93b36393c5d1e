"""Budgets and run configuration."""
import enum
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

from nelson_workbench.errors import BudgetExceeded, SpecError

DEFAULT_MAX_ELEMENTS = 10**6
DEFAULT_MAX_ENUMERATION = 10**6
DEFAULT_MAX_EXPONENT = 10**5


class Suite(str, enum.Enum):
    """Check suites runnable from the command line."""
    transfer = "transfer"
    standardisation = "standardisation"
    idealisation = "idealisation"
    soundness = "soundness"
    doctrine = "doctrine"
    all = "all"


class ReportFormat(str, enum.Enum):
    """Report output format."""
    human = "human"
    structured = "structured"


@dataclass(frozen=True)
class Budget:
    """
    Size guardrails for constructions that can explode.

    Attributes:
        max_elements: Bound on the total carrier size of any constructed object
        max_enumeration: Bound on candidates visited by an exhaustive enumeration
        max_exponent: Bound on |Ã|^|X| for the explicit ultrapower path
    """
    max_elements: int = DEFAULT_MAX_ELEMENTS
    max_enumeration: int = DEFAULT_MAX_ENUMERATION
    max_exponent: int = DEFAULT_MAX_EXPONENT

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or value <= 0:
                raise SpecError(f"budget {f.name} must be a positive integer, got {value!r}")

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "Budget":
        """
        Build a budget from NELSON_MAX_* environment variables.

        Args:
            environ: Mapping to read instead of os.environ

        Returns:
            Budget with overrides applied
        """
        env = os.environ if environ is None else environ
        values = {}
        for f, var in (
            ("max_elements", "NELSON_MAX_ELEMENTS"),
            ("max_enumeration", "NELSON_MAX_ENUMERATION"),
            ("max_exponent", "NELSON_MAX_EXPONENT"),
        ):
            raw = env.get(var)
            if raw is None:
                continue
            try:
                values[f] = int(raw)
            except ValueError:
                raise SpecError(f"{var} must be an integer, got {raw!r}")
        return cls(**values)

    def with_override(self, bound: Optional[int]) -> "Budget":
        """Apply a --budget N override to the element and enumeration bounds."""
        if bound is None:
            return self
        return replace(self, max_elements=bound, max_enumeration=bound)

    def check_elements(self, total: int, what: str) -> None:
        if total > self.max_elements:
            raise BudgetExceeded(
                f"{what} would have {total} elements (budget {self.max_elements})"
            )

    def check_enumeration(self, count: int, what: str) -> None:
        if count > self.max_enumeration:
            raise BudgetExceeded(
                f"enumerating {what} exceeds {self.max_enumeration} candidates"
            )


@dataclass(frozen=True)
class RunConfig:
    """One command-line or HTTP invocation."""
    spec_path: Path
    command: str
    suite: Suite = Suite.all
    budget: Budget = Budget()
    family: Optional[Tuple[str, ...]] = None
    output: Optional[Path] = None
    report_format: ReportFormat = ReportFormat.structured
    object_name: Optional[str] = None
    log_jsonl: Optional[Path] = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        """
        Build a RunConfig from a plain mapping, rejecting unknown keys.

        Args:
            data: Keys named like the RunConfig fields, plus optional "budget" as int

        Returns:
            RunConfig
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SpecError(f"unknown configuration keys: {', '.join(unknown)}")
        if "spec_path" not in data or "command" not in data:
            raise SpecError("configuration needs spec_path and command")
        kwargs = dict(data)
        kwargs["spec_path"] = Path(kwargs["spec_path"])
        budget = kwargs.get("budget")
        if budget is None or isinstance(budget, int):
            kwargs["budget"] = Budget.from_env().with_override(budget)
        try:
            if "suite" in kwargs:
                kwargs["suite"] = Suite(kwargs["suite"])
            if "report_format" in kwargs:
                kwargs["report_format"] = ReportFormat(kwargs["report_format"])
        except ValueError as e:
            raise SpecError(str(e))
        if kwargs.get("family") is not None:
            kwargs["family"] = tuple(kwargs["family"])
        for key in ("output", "log_jsonl"):
            if kwargs.get(key) is not None:
                kwargs[key] = Path(kwargs[key])
        return cls(**kwargs)
