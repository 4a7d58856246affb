from importlib import resources

import pytest

from sitaware import ingest, preprocess

REPORTS = resources.files("sitaware") / "data" / "casualty_reports.csv"
DATA_DIR = resources.files("sitaware") / "data"


@pytest.fixture(scope="session")
def reports_path():
    return str(REPORTS)


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def reports_table():
    return ingest.load_report_table(str(REPORTS))


@pytest.fixture(scope="session")
def reports_scaled(reports_table):
    raw = preprocess.from_report_table(reports_table)
    return preprocess.minmax_apply(preprocess.minmax_fit(raw), raw)


@pytest.fixture(scope="session")
def reports_dataset(reports_scaled):
    """Normalized report table with the default synthetic target (seed 42)."""
    return preprocess.synthesize_target(reports_scaled, seed=42)


_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _acceptance:
        mark = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{mark:5} {name}  ({duration:.2f}s)")
