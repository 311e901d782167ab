import numpy as np
import pytest

import helpers


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, title, ok, detail in sorted(helpers.ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {title}  {detail}")
