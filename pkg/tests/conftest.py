import pytest

_ACCEPTANCE = {}


@pytest.fixture()
def criterion(request):
    """Record a numbered acceptance criterion; the outcome is printed at the end of the run."""

    class Recorder:
        def __init__(self):
            self.number = None
            self.title = ""
            self.details = []

        def start(self, number, title):
            self.number, self.title = number, title

        def note(self, text):
            self.details.append(text)

    rec = Recorder()
    yield rec
    if rec.number is not None:
        call = getattr(request.node, "rep_call", None)
        ok = call is not None and call.passed
        _ACCEPTANCE[rec.number] = (ok, rec.title, "; ".join(rec.details))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title, details = _ACCEPTANCE[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}"
        if details:
            line += f" ({details})"
        terminalreporter.write_line(line)
