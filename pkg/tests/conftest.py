import pytest

# lines registered by the acceptance suite, echoed after the run
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(name: str, ok: bool | None, detail: str) -> bool | None:
        # ok=None marks a criterion that was not run
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{status}] {name}: {detail}"
        VERDICTS.append(line)
        print(line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
