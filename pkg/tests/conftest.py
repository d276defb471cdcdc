import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}  # number -> [label, passed]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): an acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, label = mark.args
    entry = _criteria.setdefault(number, [label, True])
    if call.excinfo is not None and not call.excinfo.errisinstance(KeyboardInterrupt):
        entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        label, passed = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {label}")
