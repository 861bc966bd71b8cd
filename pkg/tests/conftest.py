from __future__ import annotations

import pytest

from zsscatter import build_contour, make_potential
from zsscatter.discrete import example31_data, one_soliton_data

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture(scope="session")
def negaton():
    """q = r rebuilt from the double-pole data at k = +-i."""
    return make_potential({"kind": "reconstructed", "params": {"data": example31_data().to_json()}})


@pytest.fixture(scope="session")
def negaton_contour(negaton):
    return build_contour(negaton, 0.5)


@pytest.fixture(scope="session")
def soliton():
    return make_potential({"kind": "reconstructed", "params": {"data": one_soliton_data().to_json()}})


@pytest.fixture(scope="session")
def sech2():
    return make_potential({"kind": "sech_family", "params": {"amplitude": 2, "reduction": "R_EQ_NEG_CONJ_Q"}})


@pytest.fixture(scope="session")
def zero():
    return make_potential({"kind": "zero"})


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and "test_criterion_" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            name = report.nodeid.split("::")[-1]
            _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
