from datetime import datetime, timezone

import pytest

from stocksent.ingest import RawMessage

SAMPLE1_ORIGINAL = "$AAPL OK, bought $162.50 calls, my shares sitting fine from forever ago...LONG"
SAMPLE1_GPT = "$aapl ok, bought $162.50 calls, my shares sitting fine from forever ago...long"
SAMPLE1_BERT = "ok bought calls my shares sitting fine from forever ago long"
SAMPLE1_TS = datetime(2017, 10, 18, 13, 51, 24, tzinfo=timezone.utc)

# reference responses in the bracketed three-block layout
SAMPLE3_GPT = ("[Sentiment: '1(neg)': 0.1, '2': 0.1, '3': 0.2, '4': 0.3, '5(pos)': 0.3, Advantage: 'Advantage': 0.5, "
            "'Disadvantage': 0.5, Relation: 'Mostly Apple': 0.1, 'Mostly competitor': 0.7, 'Unrelated': 0.2]")
SAMPLE4_GPT = ("[Sentiment: '1(neg)': 0.1, '2': 0.1, '3': 0.1, '4': 0.1, '5(pos)': 0.6, Advantage: 'Advantage': 0.1, "
            "'Disadvantage': 0.9, Relation: 'Mostly Apple': 0.7, 'Mostly competitor': 0.2, 'Unrelated': 0.1]")
SAMPLE5_GPT = ("[Sentiment: '1(neg)': 0.1, '2': 0.1, '3': 0.1, '4': 0.2, '5(pos)': 0.5, Advantage: 'Advantage': 0.7, "
            "'Disadvantage': 0.3, Relation: 'Mostly Apple': 0.9, 'Mostly competitor': 0.05, 'Unrelated': 0.05]")
# sentiment-only listings, no advantage or relation block
SAMPLE2_IMPRECISE = "'1(neg)': 0.7, '2': 0.15, '3': 0.05, '4': 0.05, '5(pos)': 0.05"
SAMPLE2_OURS = "'1(neg)': 0.2, '2': 0.2, '3': 0.2, '4': 0.2, '5(pos)': 0.2"


def make_msg(id_, body, ts=SAMPLE1_TS, ticker="AAPL"):
    return RawMessage(id_, ts, ticker, body)


@pytest.fixture
def sample_message():
    return make_msg("sample1", SAMPLE1_ORIGINAL)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
