import pytest

from bilevel_mi.solver import BiLevelSpec, solve

FIG2 = BiLevelSpec(delta=1 / 6, phi=3.0, eta=1.0, sigma_beta=50.0, lam=0.1)


@pytest.fixture(scope="session")
def fig2_spec():
    return FIG2


@pytest.fixture(scope="session")
def fig2_state():
    return solve(FIG2).state


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
