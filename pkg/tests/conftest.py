import pytest

from clausevec.fol import GeneratorConfig, generate_random_clauses, parse_cnf_problem

EXAMPLE_TEXT = """\
% running example: r(A,B) & (p(A) | ~q(B,f(A)) | q(C,f(A)))
cnf(c1, axiom, (p(A) | ~q(B,f(A)) | q(C,f(A)))).
cnf(c2, axiom, r(A,B)).
"""


@pytest.fixture(scope="session")
def example_problem():
    return parse_cnf_problem(EXAMPLE_TEXT)


@pytest.fixture(scope="session")
def example_clause(example_problem):
    return example_problem.clauses[0]


@pytest.fixture(scope="session")
def unit_clause(example_problem):
    return example_problem.clauses[1]


@pytest.fixture(scope="session")
def corpus():
    """200 generated clauses with equality and skolems mixed in."""
    cfg = GeneratorConfig(n_clauses=200, equality_rate=0.15, max_depth=3)
    return generate_random_clauses(11, cfg).clauses


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one pass/fail line per acceptance criterion, printed in the summary."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
