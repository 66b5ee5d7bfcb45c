import pytest

# criterion number -> (passed, one-line summary); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    def record(n: int, passed: bool, text: str):
        ACCEPTANCE[n] = (bool(passed), text)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {text}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {text}")
