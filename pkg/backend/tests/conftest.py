from pathlib import Path

import pytest

from nelson_workbench.category import cyclic_group, terminal_category
from nelson_workbench.presheaf import FinPresheaf
from nelson_workbench.topos import ToposCtx

DATA_DIR = Path(__file__).parent / "data"


def finite_set(base, n: int, name: str, prefix: str = "e") -> FinPresheaf:
    """An n-element presheaf over the terminal category."""
    return FinPresheaf.from_labels(base, {"*": [f"{prefix}{k}" for k in range(n)]}, {}, name)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def finset() -> ToposCtx:
    return ToposCtx(terminal_category())


@pytest.fixture
def z2() -> ToposCtx:
    return ToposCtx(cyclic_group(2))


@pytest.fixture(autouse=True)
def _clean_budget_env(monkeypatch):
    for var in ("NELSON_MAX_ELEMENTS", "NELSON_MAX_ENUMERATION", "NELSON_MAX_EXPONENT",
                "NELSON_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)
