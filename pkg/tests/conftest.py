from __future__ import annotations

from pathlib import Path

import pytest

from peplead.chuckles import parse_peptide
from peplead.generator import load_vocabulary

DATA = Path(__file__).resolve().parents[1] / "src" / "peplead" / "data"


def first_line(name: str) -> str:
    return (DATA / name).read_text().splitlines()[0].strip()


RBP = first_line("rbp.chk")
SHIFT_SRC, SHIFT_DST = (DATA / "shift_example.chk").read_text().split()
HBD16 = first_line("hbd16.chk")
LUNA = first_line("luna18_analog.chk")


@pytest.fixture(scope="session")
def rbp():
    return parse_peptide(RBP)


@pytest.fixture(scope="session")
def vocab():
    return load_vocabulary(DATA / "monomers_demo.txt")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


# -- acceptance reporting ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    if number not in _CRITERIA or status == "FAIL":
        _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"[{status}] criterion {n:2d}: {title}" + (f" ({detail})" if detail else ""))
