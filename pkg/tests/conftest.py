from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import pytest

from spfaudit.corpus import load_domain_list
from spfaudit.resolver import fixture_resolver

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_ZONE = FIXTURES / "corpus20.zone"
CORPUS_LIST = FIXTURES / "corpus20.csv"

WORKED_EXAMPLE_ZONE = """
example.com TXT "v=spf1 +mx a:puffin.example.com/28 -all"
example.com MX 10 mail.example.com
mail.example.com A 198.51.100.5
puffin.example.com A 192.0.2.16
"""

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "passed": 0, "failed": 0, "seconds": 0.0})


@pytest.fixture
def worked_example():
    return fixture_resolver(WORKED_EXAMPLE_ZONE)


@pytest.fixture
def zone():
    """Build a fixture resolver from zone text."""
    return fixture_resolver


@pytest.fixture
def corpus():
    """The twenty-domain fixture corpus as (resolver, entries)."""
    entries = load_domain_list(CORPUS_LIST.read_text(), "tranco", str(CORPUS_LIST))
    return fixture_resolver(CORPUS_ZONE.read_text()), entries


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    entry = _criteria[number]
    entry["title"] = title
    entry["seconds"] += report.duration
    if report.when == "call" or report.failed:
        if report.failed:
            entry["failed"] += 1
        elif report.when == "call" and report.passed:
            entry["passed"] += 1


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["failed"] == 0 and entry["passed"] > 0 else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {number}: {entry['title']} "
            f"({entry['passed']} passed, {entry['failed']} failed, {entry['seconds']:.2f}s)"
        )
