"""Shared test plumbing.

The acceptance suite registers one verdict line per criterion; they are
echoed in a dedicated section at the end of the run so a plain
``pytest -v`` log shows every criterion's pass/fail status in one place.
"""

acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
