import pytest

from m2ar.fixtures import color_brick_bundle, color_brick_scenario

_criteria: dict[str, list] = {}


@pytest.fixture
def brick_bundle():
    return color_brick_bundle()


@pytest.fixture
def brick_scenario():
    return color_brick_scenario()


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None or report.when == "teardown" and report.passed:
        return
    cid, title = marker
    entry = _criteria.setdefault(cid, [title, True])
    if report.failed:
        entry[1] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c.lstrip("AC"))):
        title, ok = _criteria[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {title}")
