import textwrap

import pytest

SMALL_CONFIG = textwrap.dedent(
    """
    [experiment]
    seed = 3
    trials = 12
    target_arl = [40]
    detectors = ["scanb"]
    out = "bench.csv"

    [pool]
    size = 300
    thin_size = 100

    [pre_change]
    kind = "gaussian_std"
    d = 2

    [post_change]
    kind = "gaussian_mixture"
    d = 2
    mu = 1.0
    sigma = 1.0

    [scanb]
    N = 3
    B = 10
    n_tuples = 1000
    """
)


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(SMALL_CONFIG)
    return path


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
