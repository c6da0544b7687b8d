import pytest
from gmpy2 import mpq

from liouville.reals import named_real


@pytest.fixture(scope="session")
def L():
    return named_real("L")


@pytest.fixture(scope="session")
def golden():
    return named_real("golden")


def frac(a, b=1):
    return mpq(a, b)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
