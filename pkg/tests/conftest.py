import pytest
from hypothesis import HealthCheck, settings

from graphwave.graph_core import ModelParams
from graphwave.profiles import build_critical_point

settings.register_profile("graphwave", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("graphwave")


@pytest.fixture(scope="session")
def attractive_3():
    """Symmetric profile for p=3, beta=-1, N=3, omega=25 on a 1024-point grid."""
    params = ModelParams(3, 25, -1, 3)
    return build_critical_point(params, "symmetric", points_per_edge=1024)


ACCEPTANCE = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = ""):
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {mark}: {title}"
                                    + (f" ({detail})" if detail else ""))
