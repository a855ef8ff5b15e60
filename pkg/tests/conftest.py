import pytest

# (criterion, passed, detail) collected by the acceptance suite
VERDICTS: list[tuple[str, bool, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    criterion = getattr(item.function, "criterion", None)
    if criterion is None or report.when != "call":
        return
    if not any(name == criterion for name, _, _ in VERDICTS):
        # the test died before recording its verdict
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "no verdict recorded"
        VERDICTS.append((criterion, False, detail))


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(VERDICTS, key=lambda v: int(v[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
