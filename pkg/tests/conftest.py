import sys
import numpy as np
import pytest

from drmdp import _backend


@pytest.fixture(params=_backend.available())
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _backend.get(request.param))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.verdict_lines():
        terminalreporter.write_line(line)
