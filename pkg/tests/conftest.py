import pytest

CRITERIA = {
    1: "minimax invariance under reflection",
    2: "reflected joint stays in the feasible family",
    3: "orthogonality and Pythagoras of fused fits",
    4: "semi-parametric decomposition equals direct least squares",
    5: "single-domain projection, its two forms and regret optimality",
    6: "Gaussian closed forms",
    7: "mixture membership and infeasible rejection",
    8: "zero second class ignores domain 2",
    9: "innovation vanishing conditions",
    10: "kernel regressor consistency",
}

_outcomes: dict[int, bool] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number checked by the test")


def pytest_runtest_logreport(report):
    number = getattr(report, "criterion", None)
    if number is None:
        return
    ok = not report.failed and not (report.when == "call" and report.skipped)
    _outcomes[number] = _outcomes.get(number, True) and ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        if number in _outcomes:
            status = "PASS" if _outcomes[number] else "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {number:2d} {status}: {CRITERIA[number]}")
