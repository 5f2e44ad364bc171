import csv
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
PUBLISHED = ROOT / "data" / "published"

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion gate")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = getattr(report, "criterion", (None, None))
    if number is not None:
        _criteria[number] = (title, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}")


def read_rows(name: str) -> list[dict]:
    with open(PUBLISHED / name, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope="session")
def published_languages():
    return {r["language"]: r for r in read_rows("languages.csv")}


@pytest.fixture(scope="session")
def published_rer():
    out = {}
    for metric in ("LAS", "UAS"):
        for row in read_rows(f"rer_{metric.lower()}.csv"):
            for model, value in row.items():
                if model != "language":
                    out[(row["language"], model, metric)] = float(value)
    return out
