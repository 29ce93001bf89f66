"""Per-criterion PASS/FAIL summary for tests marked ``@pytest.mark.criterion``."""

from collections import defaultdict

import pytest

_TITLES = {}
_ITEMS = defaultdict(set)
_FAILED = defaultdict(set)
_PASSED = defaultdict(set)
_NOTES = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _TITLES[number] = title
            _ITEMS[number].add(item.nodeid)


def _criterion_of(nodeid):
    for number, ids in _ITEMS.items():
        if nodeid in ids:
            return number
    return None


def pytest_runtest_logreport(report):
    number = _criterion_of(report.nodeid)
    if number is None:
        return
    if report.failed:
        _FAILED[number].add(report.nodeid)
    elif report.when == "call" and report.passed:
        _PASSED[number].add(report.nodeid)


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion line of the summary."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        if mark is not None:
            _NOTES[mark.args[0]].append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_TITLES):
        ids = _ITEMS[number]
        ok = not _FAILED[number] and _PASSED[number] == ids
        ran = len(_PASSED[number] | _FAILED[number])
        line = f"criterion {number} {_TITLES[number]}: {'PASS' if ok else 'FAIL'} ({ran}/{len(ids)} tests ran)"
        tr.write_line(line)
        for text in _NOTES[number]:
            tr.write_line(f"    {text}")
