"""Collects acceptance-criterion outcomes and prints one line per criterion."""

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties += [("criterion", mark.args[0]), ("title", mark.args[1])]


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n = props["criterion"]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if report.when == "setup" and report.outcome == "failed":
            status = "ERROR"
        _criteria[n] = (status, props.get("title", ""), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title, detail = _criteria[n]
        line = f"criterion {n:2d} {status:5s} {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
