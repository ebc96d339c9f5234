from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from retrialq.model import Deterministic, Exponential, Lomax, ModelParams, ParetoTail

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# reference configuration: rho = 0.5, a = 2.5, psi = 1, L = 0.75**2.5
E1 = ModelParams(1.0, 1.0, Deterministic(1), Lomax(0.75, 2.5))
# batch tail dominates
E2 = ModelParams(0.2, 1.0, ParetoTail(2.0, 1.8), Exponential(1.0))
# equal indices
E3 = ModelParams(0.2, 1.0, ParetoTail(1.0, 2.5), Lomax(0.75, 2.5))
MM1 = ModelParams(0.5, 1e6, Deterministic(1), Exponential(1.0))

L_E1 = 0.75**2.5
N_BIG = 16384


@pytest.fixture(scope="session")
def configs() -> Path:
    return CONFIGS


@pytest.fixture(scope="session")
def e1_big():
    """All exact E1 laws at N = 16384 (about 10 s, shared by several modules)."""
    from retrialq.exact import exact_distributions

    return exact_distributions(E1, N_BIG)


_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
