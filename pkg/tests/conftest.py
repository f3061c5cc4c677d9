import numpy as np
import pytest

from molloc import AnchorSet, ChannelParams

R_UM = 10e-6
EQUILATERAL = AnchorSet(R_UM * np.array([[0.0, 1.0],
                                          [-np.sqrt(3) / 2, -0.5],
                                          [np.sqrt(3) / 2, -0.5]]))
SOURCE = np.array([1e-6, 2e-6])


@pytest.fixture
def anchors():
    return EQUILATERAL


@pytest.fixture
def source():
    return SOURCE.copy()


@pytest.fixture
def params():
    return ChannelParams()


@pytest.fixture
def exact_params():
    return ChannelParams(noise_free=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def distances(anchors, y):
    return np.linalg.norm(anchors.positions - y, axis=1)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# acceptance criteria append (label, passed, detail) here
ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_REPORT:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
