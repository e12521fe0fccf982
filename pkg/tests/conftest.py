import pytest
import torch
from hypothesis import HealthCheck, settings

from injectgen.synth import SAVE_PASSWORD, ToyGenerator

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")
torch.set_num_threads(1)


@pytest.fixture
def save_password():
    return SAVE_PASSWORD


def toy_function(seed: int, statements: int = 6) -> str:
    return ToyGenerator(seed).function(statements).text


# acceptance verdicts, printed together at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title} ({detail})")
