import numpy as np
import pytest

from dpgls.stats_kernels import RngStream


@pytest.fixture
def stream():
    return RngStream(seed=12345, stream_id=0)


@pytest.fixture
def gen():
    return np.random.default_rng(2024)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for key, (ok, detail) in mod.RESULTS.items():
        terminalreporter.write_line(f"CRITERION {key}: {'PASS' if ok else 'FAIL'} | {detail}")
