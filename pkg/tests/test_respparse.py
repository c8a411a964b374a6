import pytest
from hypothesis import given, strategies as st

from stocksent.errors import NotScorableError
from stocksent.respparse import (AdvantageClass, SentimentRecord, Status, classify_advantage, classify_sentiment,
                                 format_record, parse_response, parse_sentiment_block, parse_text, read_records,
                                 write_records)
from stocksent.scorer import RawResponse

from conftest import SAMPLE2_IMPRECISE, SAMPLE2_OURS, SAMPLE3_GPT, SAMPLE4_GPT, SAMPLE5_GPT


def rec(sent=(0.2,) * 5, adv=(0.5, 0.5), rel=(0.4, 0.3, 0.3)):
    return SentimentRecord("r", Status.PARSED, tuple(sent), tuple(adv), tuple(rel))


@pytest.mark.parametrize("text, sent, adv, rel", [
    (SAMPLE3_GPT, (0.1, 0.1, 0.2, 0.3, 0.3), (0.5, 0.5), (0.1, 0.7, 0.2)),
    (SAMPLE4_GPT, (0.1, 0.1, 0.1, 0.1, 0.6), (0.1, 0.9), (0.7, 0.2, 0.1)),
    (SAMPLE5_GPT, (0.1, 0.1, 0.1, 0.2, 0.5), (0.7, 0.3), (0.9, 0.05, 0.05)),
])
def test_printed_evaluations(text, sent, adv, rel):
    r = parse_text("x", text)
    assert r.status is Status.PARSED
    assert (r.sentiment_probs, r.advantage_probs, r.relation_probs) == (sent, adv, rel)


def test_sentiment_only_listings():
    assert parse_sentiment_block(SAMPLE2_IMPRECISE) == (0.7, 0.15, 0.05, 0.05, 0.05)
    assert parse_sentiment_block(SAMPLE2_OURS) == (0.2,) * 5


@pytest.mark.parametrize("text", ["NA", "  na \n", '"NA"', "'NA'"])
def test_na(text):
    assert parse_text("x", text).status is Status.NA


@pytest.mark.parametrize("text", [
    "I cannot evaluate this.",
    SAMPLE5_GPT[:-1],
    SAMPLE5_GPT[: SAMPLE5_GPT.index(", Relation")] + "]",
    "[Sentiment: banana]",
    "",
    SAMPLE5_GPT.replace("0.5, Advantage", "0.9, Advantage"),
    SAMPLE5_GPT.replace("'Disadvantage': 0.3", "'Disadvantage': -0.3"),
    SAMPLE5_GPT.replace("'2': 0.1", "'2': 0.1, '2': 0.1"),
    SAMPLE5_GPT + " extra",
])
def test_unparseable(text):
    assert parse_text("x", text).status is Status.UNPARSEABLE


def test_quote_and_whitespace_variation():
    text = SAMPLE5_GPT.replace("'", '"').replace(", ", ",\n  ").replace("Sentiment:", "sentiment :")
    assert parse_text("x", text) == parse_text("x", SAMPLE5_GPT)


def test_near_one_renormalized():
    text = SAMPLE5_GPT.replace("'5(pos)': 0.5", "'5(pos)': 0.51")
    r = parse_text("x", text)
    assert r.status is Status.PARSED
    assert sum(r.sentiment_probs) == pytest.approx(1.0)
    assert r.sentiment_probs[4] == pytest.approx(0.51 / 1.01)


def test_failed_request_is_unparseable():
    r = parse_response(RawResponse("m", None, 0.0, 0.0, 4, "HTTP 503"))
    assert r.status is Status.UNPARSEABLE and r.message_id == "m"


@pytest.mark.parametrize("sent, expected", [((0.1, 0.1, 0.1, 0.2, 0.5), 5), ((0.2,) * 5, 1), ((1, 0, 0, 0, 0), 1),
                                            ((0, 0.4, 0, 0.4, 0.2), 2)])
def test_classify_sentiment(sent, expected):
    assert classify_sentiment(rec(sent=sent)) == expected


@pytest.mark.parametrize("adv, expected", [((0.7, 0.3), AdvantageClass.ADVANTAGE), ((0.5, 0.5), AdvantageClass.EQUAL),
                                           ((0.1, 0.9), AdvantageClass.DISADVANTAGE)])
def test_classify_advantage(adv, expected):
    assert classify_advantage(rec(adv=adv)) is expected


@pytest.mark.parametrize("status", [Status.NA, Status.UNPARSEABLE])
def test_not_scorable(status):
    r = SentimentRecord("q", status)
    with pytest.raises(NotScorableError):
        classify_sentiment(r)
    with pytest.raises(NotScorableError):
        classify_advantage(r)
    with pytest.raises(NotScorableError):
        r.p_advantage


def test_records_round_trip(tmp_path):
    recs = [parse_text("a", SAMPLE3_GPT), parse_text("b", "NA"), parse_text("c", "junk")]
    write_records(recs, tmp_path / "r.jsonl")
    assert read_records(tmp_path / "r.jsonl") == recs


def _composition(k):
    return st.lists(st.integers(0, 20), min_size=k, max_size=k).filter(lambda v: sum(v) > 0).map(
        lambda v: tuple(x / sum(v) for x in v))


@given(_composition(5), _composition(2), _composition(3), st.sampled_from(["Apple", "Tesla"]))
def test_format_parse_round_trip(sent, adv, rel, name):
    r = SentimentRecord("x", Status.PARSED, sent, adv, rel)
    back = parse_text("x", format_record(r, name))
    assert back.status is Status.PARSED
    assert back.sentiment_probs == pytest.approx(sent, abs=1e-12)
    assert back.advantage_probs == pytest.approx(adv, abs=1e-12)
    assert back.relation_probs == pytest.approx(rel, abs=1e-12)


@given(st.text(max_size=200))
def test_parser_never_raises(text):
    assert parse_text("x", text).status in set(Status)
