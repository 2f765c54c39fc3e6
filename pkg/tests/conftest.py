"""Shared pytest plumbing: the acceptance suite records one line per
criterion; print them as a summary block at the end of the run."""

acceptance_lines = []


def record(status: str, name: str, detail: str) -> None:
    acceptance_lines.append(f"[{status}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
