import os
import sys
from collections import defaultdict

sys.path.insert(0, os.path.dirname(__file__))

_results = defaultdict(list)  # criterion -> [(nodeid, passed, detail)]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _results[props["criterion"]].append((report.nodeid, report.passed, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_results):
        entries = _results[crit]
        ok = all(passed for _, passed, _ in entries)
        n_pass = sum(passed for _, passed, _ in entries)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({n_pass}/{len(entries)} checks)")
        for nodeid, passed, detail in entries:
            if detail and (not passed or len(entries) <= 4):
                tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {nodeid.split('::')[-1]}: {detail}")
