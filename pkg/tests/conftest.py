import pytest

from kerr_ring.model import ModelParams

FIG2_DRIVE = 2.70


@pytest.fixture
def ring() -> ModelParams:
    """Parameters shared by the mean-field figures (drive off)."""
    return ModelParams(delta=-3.5, u_a=0.6, u_b=0.6, v=0.1, j_re=0.1, kappa=1.0, gamma=2.0)


@pytest.fixture
def sensing() -> ModelParams:
    """Quantum operating point used for the photon-statistics figures."""
    return ModelParams(
        delta=-2.25, u_a=0.6, u_b=0.6, v=0.1, j_re=0.1, j_im=0.1, kappa=1.0, gamma=2.0, f_a=2.0, f_b=2.0
    )


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
