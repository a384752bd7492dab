import json
from pathlib import Path

import pytest

from dermawave.materials import builtin_catalog

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture(scope="session")
def golden_permittivity():
    return json.loads((FIXTURES / "golden_permittivity.json").read_text())


@pytest.fixture(scope="session")
def golden_losses():
    return json.loads((FIXTURES / "golden_losses.json").read_text())


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(test_acceptance.RESULTS, key=lambda k: (int(k.rstrip("abcd")), k)):
        ok, detail = test_acceptance.RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
