import math

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from concentrate.core import SchmidtPair

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# alpha^2 strictly inside (0.5, 1): entangled and not yet maximal.
alpha_sq = st.floats(min_value=0.5 + 1e-6, max_value=1.0 - 1e-6, allow_nan=False)
schmidt_pairs = alpha_sq.map(SchmidtPair.from_alpha_sq)

GRID_ALPHA_SQ = tuple(np.linspace(0.5, 0.99, 50))


def grid_pairs():
    return [SchmidtPair.from_alpha_sq(float(a)) for a in GRID_ALPHA_SQ]


def random_amplitudes(rng, n_qubits):
    v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pair(alpha_sq):
    return SchmidtPair(math.sqrt(alpha_sq), math.sqrt(1.0 - alpha_sq))


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        previous = _ACCEPTANCE.get(number, (title, True))
        _ACCEPTANCE[number] = (title, previous[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
