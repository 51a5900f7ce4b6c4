import itertools

import pytest

from trace_eval.judge import ParseFailure, parse_decisions, serialize_decisions
from trace_eval.labels import DimScores, Rating


def test_prompt_dialect():
    raw = ('{"reasoning": "fine", "content": "1", "voice_quality": '
           '"both_good", "instruction_following_audio": "2"}')
    scores = parse_decisions(raw)
    assert scores.content is Rating.WIN_1
    assert scores.voice_quality is Rating.BOTH_GOOD
    assert scores.paralinguistics is Rating.WIN_2


def test_listing_dialect():
    raw = ('{"prediction_content": "1", "prediction_vq": "both_good", '
           '"prediction_para": "2", '
           '"reasoning": {"content": "c", "vq": "v", "para": "p"}}')
    scores = parse_decisions(raw)
    assert scores.paralinguistics is Rating.WIN_2
    assert scores.reasoning == {"content": "c", "vq": "v", "para": "p"}


def test_fenced_block_equals_unfenced():
    plain = ('{"content": "2", "voice_quality": "2", '
             '"instruction_following_audio": "both_bad"}')
    fenced = f"Here is my analysis.\n```json\n{plain}\n```\nDone."
    assert parse_decisions(fenced) == parse_decisions(plain)


def test_prose_then_object_repaired():
    raw = ('After comparing carefully I conclude: {"content": "1", '
           '"voice_quality": "1", "instruction_following_audio": "1"} '
           "thank you")
    scores = parse_decisions(raw)
    assert scores.astuple() == (Rating.WIN_1, Rating.WIN_1, Rating.WIN_1)


def test_braces_inside_strings_do_not_confuse_extraction():
    raw = ('noise {"reasoning": "shape like {this}", "content": "1", '
           '"voice_quality": "2", "instruction_following_audio": "1"} tail')
    assert parse_decisions(raw).voice_quality is Rating.WIN_2


def test_extra_keys_tolerated():
    raw = ('{"content": "1", "voice_quality": "1", '
           '"instruction_following_audio": "1", "confidence": 0.9}')
    assert parse_decisions(raw).content is Rating.WIN_1


def test_hyphenated_labels_accepted():
    raw = ('{"content": "both-good", "voice_quality": "both-bad", '
           '"instruction_following_audio": "1"}')
    scores = parse_decisions(raw)
    assert scores.content is Rating.BOTH_GOOD
    assert scores.voice_quality is Rating.BOTH_BAD


def test_bad_label_code():
    raw = ('{"content": "3", "voice_quality": "1", '
           '"instruction_following_audio": "1"}')
    with pytest.raises(ParseFailure) as err:
        parse_decisions(raw)
    assert err.value.code == "BAD_LABEL"


def test_missing_key_code():
    raw = '{"content": "1", "voice_quality": "1"}'
    with pytest.raises(ParseFailure) as err:
        parse_decisions(raw)
    assert err.value.code == "MISSING_KEY"
    assert "instruction_following_audio" in str(err.value)


def test_not_json_code():
    with pytest.raises(ParseFailure) as err:
        parse_decisions("I prefer the first audio overall.")
    assert err.value.code == "NOT_JSON"


def test_non_string_label_rejected():
    raw = ('{"content": 1, "voice_quality": "1", '
           '"instruction_following_audio": "1"}')
    with pytest.raises(ParseFailure) as err:
        parse_decisions(raw)
    assert err.value.code == "BAD_LABEL"


@pytest.mark.parametrize("dialect", ["listing", "prompt"])
def test_round_trip_all_triples_both_dialects(dialect):
    for c, vq, p in itertools.product(Rating, Rating, Rating):
        scores = DimScores(c, vq, p,
                           reasoning={"content": "a", "vq": "b", "para": "c"})
        assert parse_decisions(serialize_decisions(scores, dialect)) == scores


def test_string_reasoning_spread_to_all_dimensions():
    raw = ('{"reasoning": "identical quality", "content": "both_good", '
           '"voice_quality": "both_good", '
           '"instruction_following_audio": "both_good"}')
    scores = parse_decisions(raw)
    assert scores.reasoning["vq"] == "identical quality"


def test_unknown_dialect_rejected():
    scores = DimScores(Rating.WIN_1, Rating.WIN_1, Rating.WIN_1)
    with pytest.raises(ValueError):
        serialize_decisions(scores, dialect="yaml")
