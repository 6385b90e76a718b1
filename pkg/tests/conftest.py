import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 10):
        if number not in results:
            terminalreporter.write_line(f"criterion {number}: NOT RUN")
            continue
        title, ok, detail = results[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
