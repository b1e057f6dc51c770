import numpy as np
import pytest

from qamsdr.model import complex_to_real, generate_instance

ACCEPTANCE_LINES: list[str] = []


def real_instance(m_tilde, n_tilde, q, snr_db, seed):
    return complex_to_real(generate_instance(m_tilde, n_tilde, q, snr_db, seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
