import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sanipipe.gazetteer import data_path  # noqa: E402
from _oracles import PlantedScorer  # noqa: E402

TOY = data_path("toy")


@pytest.fixture
def toy():
    return TOY


@pytest.fixture
def planted():
    return PlantedScorer


# one summary line per acceptance criterion, in criterion order
_CRITERIA = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        num, title = marker
        entry = _CRITERIA.setdefault(num, {"title": title, "outcomes": []})
        entry["outcomes"].append((report.outcome, report.nodeid.split("::")[-1]))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = m.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outcomes = [o for o, _ in entry["outcomes"]]
        if "failed" in outcomes:
            status = "FAIL"
        elif "passed" in outcomes:
            status = "PASS"
        else:
            status = "SKIP"
        note = ""
        skipped = [name for o, name in entry["outcomes"] if o == "skipped"]
        if skipped and status != "SKIP":
            note = f"  (skipped: {', '.join(skipped)})"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {entry['title']}{note}")
