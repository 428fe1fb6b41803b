import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that was collected and run."""
    lines = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or (rep.when != "call" and outcome == "passed"):
                continue
            num = int(m.group(1))
            if num in lines and lines[num][0] == "FAIL":
                continue
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            status = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
            lines[num] = (status, m.group(2), detail)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(lines):
        status, name, detail = lines[num]
        terminalreporter.write_line(f"criterion {num} {name}: {status}" + (f"  [{detail}]" if detail else ""))
