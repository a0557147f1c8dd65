"""Scoreboard for the acceptance suite.

Each acceptance test is named test_criterion_NN; after the run a summary
section prints one PASS/FAIL line per criterion so the whole checklist can
be read at a glance. Tests may attach a short detail string through the
criterion_detail fixture (numbers worth reporting, hit counts).
"""

import re

import pytest

TITLES = {
    1: "averaging-only run lands on the stationary-weighted mean",
    2: "opinion envelope narrows monotonically without steering",
    3: "mean opinion moves by exactly the signed steering each step",
    4: "loop simulation matches the closed-form operator unroll",
    5: "opposite-reaction groups separate pathwise on the identity graph",
    6: "stubborn anchors confine everyone to their opinion interval",
    7: "signed averaging keeps the spread and one-sided bounds",
    8: "weight scaling sandwiches opinions between scaled extremes",
    9: "peak spread exceeds the steering floor on mixed populations",
    10: "sweep statistics track steering strength by regime",
    11: "event peak responds to drift and cross-block mixing as expected",
    12: "rescaling distance is exact and beats a brute-force scan",
    13: "annealing reaches a planted convex optimum",
    14: "full pipeline recovers the mixing parameter from synthetic data",
    15: "two-layer fit beats the stubbornness-only baseline",
    16: "identifiability score separates planted basins from noise",
    17: "every command replays bit-for-bit from its resolved config",
}

_DETAILS: dict[int, str] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


@pytest.fixture
def criterion_detail(request):
    """Callable recording a one-line detail for the summary section.

    Call it before asserting so the number survives a failure.
    """
    match = _PATTERN.search(request.node.nodeid)
    num = int(match.group(1)) if match else None

    def record(text: str) -> None:
        if num is not None:
            _DETAILS[num] = text

    return record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL"), ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(status, []):
            match = _PATTERN.search(getattr(report, "nodeid", ""))
            if match:
                outcomes.setdefault(int(match.group(1)), label)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        line = f"criterion {num:2d} {outcomes[num]:4s} - {TITLES.get(num, 'unknown')}"
        if num in _DETAILS:
            line += f" ({_DETAILS[num]})"
        terminalreporter.write_line(line)
