"""Collects one verdict line per acceptance criterion for the terminal summary."""

_verdicts: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", marker.args))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    number, title = props["criterion"]
    detail = props.get("detail", "")
    if report.when == "call" or report.outcome != "passed":
        if hasattr(report, "wasxfail"):
            verdict = "PASS" if report.outcome == "passed" else "FAIL (known, xfail)"
        else:
            verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if number not in _verdicts or verdict != "PASS":
            _verdicts[number] = (title, verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, verdict, detail = _verdicts[number]
        line = f"criterion {number} [{verdict}] {title}"
        terminalreporter.write_line(line + (f": {detail}" if detail else ""))
