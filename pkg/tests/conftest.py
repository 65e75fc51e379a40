import pytest

from bessarb.results import BacktestResult

_acceptance = []

# (strategy, running total, re-summed total) for every backtest built in this session
BACKTESTS = []
_init = BacktestResult.__init__


def _recording_init(self, *args, **kwargs):
    _init(self, *args, **kwargs)
    BACKTESTS.append((self.strategy, self.ledger.total_revenue, self.ledger.resummed()))


BacktestResult.__init__ = _recording_init


def pytest_collection_modifyitems(items):
    """Run tests marked ``last`` after everything else."""
    items.sort(key=lambda item: item.get_closest_marker("last") is not None)


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion for the summary lines."""

    class Recorder:
        def __init__(self):
            self.number = None
            self.detail = ""

        def __call__(self, number, title):
            self.number = number
            self.title = title
            return self

    rec = Recorder()
    yield rec
    outcome = getattr(request.node, "rep_call", None)
    if rec.number is not None:
        passed = outcome is not None and outcome.passed
        _acceptance.append((rec.number, rec.title, passed, rec.detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    result = yield
    report = result.get_result()
    if report.when == "call":
        item.rep_call = report


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_acceptance, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d} {status}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
