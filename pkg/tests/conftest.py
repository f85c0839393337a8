import pytest

from mlmt.hierarchy import load_hierarchy
from mlmt.rules import parse_rule_module

from support import pls_fixture_paths

# one line per acceptance criterion, echoed after the run so the verdicts
# stay visible even though pytest captures test stdout
criterion_lines = []


def pytest_terminal_summary(terminalreporter):
    if criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pls_paths():
    return pls_fixture_paths()


@pytest.fixture(scope="session")
def pls(pls_paths):
    return load_hierarchy(pls_paths[0])


@pytest.fixture(scope="session")
def pls_module(pls_paths):
    with open(pls_paths[1], encoding="utf-8") as fh:
        return parse_rule_module(fh.read())


@pytest.fixture(scope="session")
def pls_rules(pls_module):
    return {r.name: r for r in pls_module.rules}
