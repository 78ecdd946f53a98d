import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in rep.nodeid or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome != "skipped":
                continue
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" not in props:
                continue
            verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
            lines.append((props["criterion"], verdict, props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {num}: {verdict}  {detail}")
