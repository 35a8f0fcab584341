import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion under ``name``."""

    def register(name):
        ACCEPTANCE[name] = "FAIL"
        request.node._criterion = name

    return register


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = getattr(item, "_criterion", None)
    if name is not None and report.when == "call":
        ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0])):
        terminalreporter.write_line(f"{ACCEPTANCE[name]}  criterion {name}")
