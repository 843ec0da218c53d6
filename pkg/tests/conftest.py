import numpy as np
import pytest

from fdpgp.tree import parse_sexpr, random_tree

REFERENCE = "(ADD (SRF (SUB J 1) 1) (SRF (SUB J 2) 0))"

_acceptance = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run long statistical desk-scale checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else outcome.upper():7} {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def reference_tree():
    return parse_sexpr(REFERENCE)


def small_trees(rng, count, max_depth=5):
    """Random grow/full trees; depth <= 5 keeps size <= 63."""
    return [random_tree("grow" if rng.random() < 0.5 else "full",
                        int(rng.integers(0, max_depth + 1)), rng)
            for _ in range(count)]
