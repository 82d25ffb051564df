from __future__ import annotations

from pathlib import Path

import pytest

from skillgroups import build_pool, load_library

FIXTURES = Path(__file__).parent / "fixtures"
INVOICE_DIR = FIXTURES / "invoice"
GATE_DIR = FIXTURES / "gate"
INVOICE_QUERY = "detect fraudulent invoices across pdf and xlsx with fuzzy matching"


@pytest.fixture(scope="session")
def invoice_library():
    return load_library(INVOICE_DIR)


@pytest.fixture(scope="session")
def invoice_pool(invoice_library):
    return build_pool(invoice_library)


@pytest.fixture(scope="session")
def gate_library():
    return load_library(GATE_DIR)


@pytest.fixture(scope="session")
def gate_pool(gate_library):
    return build_pool(gate_library)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
