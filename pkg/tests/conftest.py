import pytest

from freebound import CES, CEV, GBM, Bessel3, CobbDouglas

# Reference parameterizations: GBM mu=0, sigma=1; CEV sigma=1, gamma=1/2;
# alpha=beta=1/2 with r=1/2 for Cobb-Douglas, r=3/2 for CES.
CD = CobbDouglas(0.5, 0.5)
CD_DIFFUSIONS = [GBM(0.0, 1.0, 0.5), Bessel3(0.5), CEV(0.5, 1.0, 0.5)]
CES_DIFFUSIONS = [GBM(0.0, 1.0, 1.5), Bessel3(1.5), CEV(1.5, 1.0, 0.5)]
CES_ORDERS = (2, 3, 5)


def reference_cases():
    cases = [(d, CD) for d in CD_DIFFUSIONS]
    cases += [(d, CES(n)) for d in CES_DIFFUSIONS for n in CES_ORDERS]
    return cases


def case_id(case):
    d, p = case
    extra = f"n{p.n}" if isinstance(p, CES) else "cd"
    return f"{type(d).__name__}-{extra}"


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
