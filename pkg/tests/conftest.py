import os

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: takes minutes; deselect with -m 'not slow'")


@pytest.fixture(autouse=True)
def _single_thread_default(monkeypatch):
    monkeypatch.setenv("UNIDIFF_THREADS", os.environ.get("UNIDIFF_TEST_THREADS", "1"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
