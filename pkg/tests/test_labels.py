"""Exhaustive checks of the label lattice and collapse rules."""

import itertools
import time

import pytest

from trace_eval.labels import (
    DROPPED,
    Arity,
    BadLabelError,
    CollapsedLabel,
    DimScores,
    Rating,
    acceptability,
    collapse,
    from_acceptability,
    is_winner,
    parse_rating,
    rating_min,
)

ALL = list(Rating)


def test_exactly_four_values_with_expected_strings():
    assert {r.value for r in Rating} == {"1", "2", "both_good", "both_bad"}


def test_parse_accepts_both_spellings_and_emits_underscores():
    assert parse_rating("both-good") is Rating.BOTH_GOOD
    assert parse_rating("both_good") is Rating.BOTH_GOOD
    assert parse_rating(" Both_Bad ") is Rating.BOTH_BAD
    assert parse_rating("1") is Rating.WIN_1
    assert Rating.BOTH_GOOD.value == "both_good"


@pytest.mark.parametrize("bad", ["3", "tie", "", "win_1", "both", "0"])
def test_parse_rejects_out_of_space_labels(bad):
    with pytest.raises(BadLabelError):
        parse_rating(bad)


def test_acceptability_bijection():
    assert acceptability(Rating.WIN_1) == (True, False)
    assert acceptability(Rating.WIN_2) == (False, True)
    assert acceptability(Rating.BOTH_GOOD) == (True, True)
    assert acceptability(Rating.BOTH_BAD) == (False, False)
    for r in ALL:
        assert from_acceptability(acceptability(r)) is r


def test_rating_min_examples():
    assert rating_min(Rating.BOTH_GOOD, Rating.WIN_2) is Rating.WIN_2
    assert rating_min(Rating.BOTH_BAD, Rating.WIN_1) is Rating.BOTH_BAD
    # opposing winners annihilate: (1,0) ∧ (0,1) = (0,0)
    assert rating_min(Rating.WIN_1, Rating.WIN_2) is Rating.BOTH_BAD


def test_rating_min_lattice_laws():
    start = time.monotonic()
    for a, b in itertools.product(ALL, ALL):
        assert rating_min(a, b) is rating_min(b, a)
    for a, b, c in itertools.product(ALL, ALL, ALL):
        assert rating_min(rating_min(a, b), c) is rating_min(a, rating_min(b, c))
    for a in ALL:
        assert rating_min(a, a) is a
        assert rating_min(a, Rating.BOTH_GOOD) is a
        assert rating_min(a, Rating.BOTH_BAD) is Rating.BOTH_BAD
    assert time.monotonic() - start < 1.0


def test_rating_min_is_pairwise_and():
    for a, b in itertools.product(ALL, ALL):
        pa, pb = acceptability(a), acceptability(b)
        expected = (pa[0] and pb[0], pa[1] and pb[1])
        assert acceptability(rating_min(a, b)) == expected


def test_collapse_four_way_is_identity():
    for r in ALL:
        out = collapse(r, Arity.FOUR_WAY)
        assert out == CollapsedLabel(Arity.FOUR_WAY, r.value)


def test_collapse_three_way_folds_typed_ties():
    assert collapse(Rating.BOTH_BAD, Arity.THREE_WAY).value == "tie"
    assert collapse(Rating.BOTH_GOOD, Arity.THREE_WAY).value == "tie"
    for r in (Rating.WIN_1, Rating.WIN_2):
        assert collapse(r, Arity.THREE_WAY).value == r.value


def test_collapse_two_way_drops_exactly_the_ties():
    assert collapse(Rating.WIN_1, Arity.TWO_WAY).value == "1"
    assert collapse(Rating.WIN_2, Arity.TWO_WAY).value == "2"
    assert collapse(Rating.BOTH_GOOD, Arity.TWO_WAY) is DROPPED
    assert collapse(Rating.BOTH_BAD, Arity.TWO_WAY) is DROPPED
    dropped = [r for r in ALL if collapse(r, Arity.TWO_WAY) is DROPPED]
    assert dropped == [Rating.BOTH_GOOD, Rating.BOTH_BAD]


def test_dropped_is_a_singleton_signal_not_a_label():
    assert not isinstance(DROPPED, (CollapsedLabel, Rating))
    assert repr(DROPPED) == "DROPPED"


def test_arity_from_int():
    assert Arity.from_int(2) is Arity.TWO_WAY
    assert Arity.from_int(4) is Arity.FOUR_WAY
    with pytest.raises(ValueError):
        Arity.from_int(5)


def test_dim_scores_reasoning_keys_always_present():
    scores = DimScores(Rating.WIN_1, Rating.WIN_2, Rating.BOTH_BAD)
    assert set(scores.reasoning) == {"content", "vq", "para"}
    partial = DimScores(Rating.WIN_1, Rating.WIN_2, Rating.BOTH_BAD,
                        reasoning={"vq": "muffled"})
    assert partial.reasoning["vq"] == "muffled"
    assert partial.reasoning["content"] == ""


def test_dim_scores_with_dim():
    scores = DimScores(Rating.WIN_1, Rating.WIN_2, Rating.BOTH_BAD)
    forced = scores.with_dim("content", Rating.BOTH_GOOD)
    assert forced.content is Rating.BOTH_GOOD
    assert forced.voice_quality is scores.voice_quality
    assert scores.content is Rating.WIN_1
