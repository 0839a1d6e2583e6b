from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--aceitacao",
        action="store_true",
        default=False,
        help="Roda as execuções de aceitação (minutos). Ex: python -m pytest -q --aceitacao",
    )


@pytest.fixture
def aceitacao(request: pytest.FixtureRequest) -> bool:
    # dest "aceitacao" (sem --)
    return bool(request.config.getoption("aceitacao"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(12345))
