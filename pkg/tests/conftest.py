"""Collects the acceptance verdict lines and prints them after the run."""

import pytest

VERDICTS: list = []


class Verdicts:
    def line(self, number: int, ok: bool, text: str) -> None:
        VERDICTS.append((number, len(VERDICTS), f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"))

    def detail(self, number: int, text: str) -> None:
        VERDICTS.append((number, len(VERDICTS), f"    {text}"))


@pytest.fixture
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, text in sorted(VERDICTS):
        terminalreporter.write_line(text)
