"""Nelson Workbench - Nelson's internal set theory checked on finite presheaf toposes."""
from nelson_workbench.category import FinCategory, builtin_category, cyclic_group
from nelson_workbench.config import Budget, RunConfig, Suite
from nelson_workbench.errors import (
    BudgetExceeded,
    ShapeError,
    SpecError,
    StructureError,
    WorkbenchError,
)
from nelson_workbench.nelson import NelsonStructure, build_nelson
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Report
from nelson_workbench.topos import ToposCtx
from nelson_workbench.ultra import InternalFilter, generated_filter, principal_ultrafilter

__version__ = "0.1.0"
__all__ = [
    "FinCategory",
    "builtin_category",
    "cyclic_group",
    "FinPresheaf",
    "PsMap",
    "Subobject",
    "ToposCtx",
    "NelsonStructure",
    "build_nelson",
    "InternalFilter",
    "principal_ultrafilter",
    "generated_filter",
    "Budget",
    "RunConfig",
    "Suite",
    "Report",
    "WorkbenchError",
    "SpecError",
    "ShapeError",
    "StructureError",
    "BudgetExceeded",
]
