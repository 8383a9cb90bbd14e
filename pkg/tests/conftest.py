import numpy as np
import pytest

from finslerlab import _jetcore_py, _kernels, catalog


def _backend_modules():
    mods = {"python": _jetcore_py}
    if _kernels.compiled_kernels is not None:
        mods["cython"] = _kernels.compiled_kernels
    return mods


@pytest.fixture(params=["python", "cython"])
def kernel_backend(request, monkeypatch):
    """Run a test once per jet-kernel backend."""
    mods = _backend_modules()
    if request.param not in mods:
        pytest.skip("compiled kernels not built")
    mod = mods[request.param]
    monkeypatch.setattr(_kernels, "mul", mod.mul)
    monkeypatch.setattr(_kernels, "horner", mod.horner)
    return request.param


@pytest.fixture(scope="session")
def metrics():
    return catalog.catalog()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Dict ``criterion -> (passed, summary)`` printed at the end of the run."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        ok, summary = lines[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {summary}")
