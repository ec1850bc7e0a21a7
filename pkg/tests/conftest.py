import numpy as np
import pytest

from stratcomm.gaussian_core import ModelParams
from stratcomm.noisy_jscc import ChannelParams

ACCEPTANCE_LINES = []


def random_cov3(rng, min_eig=0.05):
    while True:
        a = rng.normal(size=(3, 3))
        m = a @ a.T + min_eig * np.eye(3)
        if np.linalg.eigvalsh(m / m[0, 0]).min() > min_eig / 4:
            return m


def params_from_cov(m) -> ModelParams:
    s = m[0, 0]
    return ModelParams(s, m[0, 1] / s, m[1, 1] / s, m[0, 2] / s, m[1, 2] / s, m[2, 2] / s)


def random_si_params(rng) -> ModelParams:
    return params_from_cov(random_cov3(rng))


def random_channel(rng) -> ChannelParams:
    return ChannelParams(float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.1, 10.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture
def record_acceptance():
    def record(number, name, passed, detail):
        ACCEPTANCE_LINES.append(f"[{number}] {'PASS' if passed else 'FAIL'}  {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
