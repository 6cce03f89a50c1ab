import os
import sys

import numpy as np
import pytest

from bgwlab.offspring import build_critical_tail_law, build_head_only_law

TOY_HEAD = (0.5, 0.1, 0.3, 0.1)
FULL = os.environ.get("BGWLAB_FULL") == "1"


@pytest.fixture(scope="session")
def toy():
    return build_head_only_law(TOY_HEAD)


@pytest.fixture(scope="session")
def cauchy_law():
    return build_critical_tail_law(1 / 3, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
