"""Fusion policies against an independently hand-derived truth table.

The table below was written out row by row from the acceptability-pair
semantics (winner = exactly one side acceptable, cap = pairwise AND),
before the fusion module existed, and is frozen here as literals.
"""

import time

import pytest

from trace_eval.fusion import (
    FusionPolicy,
    fuse,
    fuse_majority,
    fuse_s2s_arena,
    fuse_speakbench,
)
from trace_eval.labels import DimScores, Rating, is_winner, rating_min

R = {"1": Rating.WIN_1, "2": Rating.WIN_2, "g": Rating.BOTH_GOOD,
     "b": Rating.BOTH_BAD}


def d(c, vq, p):
    return DimScores(content=R[c], voice_quality=R[vq], paralinguistics=R[p])


# (content, vq, para) -> (speakbench, s2s_arena)
TRUTH_TABLE = {
    ("1", "1", "1"): ("1", "1"),
    ("1", "1", "2"): ("1", "b"),
    ("1", "1", "g"): ("1", "1"),
    ("1", "1", "b"): ("1", "b"),
    ("1", "2", "1"): ("1", "1"),
    ("1", "2", "2"): ("1", "b"),
    ("1", "2", "g"): ("1", "1"),
    ("1", "2", "b"): ("1", "b"),
    ("1", "g", "1"): ("1", "1"),
    ("1", "g", "2"): ("1", "b"),
    ("1", "g", "g"): ("1", "1"),
    ("1", "g", "b"): ("1", "b"),
    ("1", "b", "1"): ("1", "1"),
    ("1", "b", "2"): ("1", "b"),
    ("1", "b", "g"): ("1", "1"),
    ("1", "b", "b"): ("1", "b"),
    ("2", "1", "1"): ("2", "b"),
    ("2", "1", "2"): ("2", "2"),
    ("2", "1", "g"): ("2", "2"),
    ("2", "1", "b"): ("2", "b"),
    ("2", "2", "1"): ("2", "b"),
    ("2", "2", "2"): ("2", "2"),
    ("2", "2", "g"): ("2", "2"),
    ("2", "2", "b"): ("2", "b"),
    ("2", "g", "1"): ("2", "b"),
    ("2", "g", "2"): ("2", "2"),
    ("2", "g", "g"): ("2", "2"),
    ("2", "g", "b"): ("2", "b"),
    ("2", "b", "1"): ("2", "b"),
    ("2", "b", "2"): ("2", "2"),
    ("2", "b", "g"): ("2", "2"),
    ("2", "b", "b"): ("2", "b"),
    ("g", "1", "1"): ("1", "1"),
    ("g", "1", "2"): ("2", "2"),
    ("g", "1", "g"): ("1", "1"),
    ("g", "1", "b"): ("1", "b"),
    ("g", "2", "1"): ("1", "1"),
    ("g", "2", "2"): ("2", "2"),
    ("g", "2", "g"): ("2", "2"),
    ("g", "2", "b"): ("2", "b"),
    ("g", "g", "1"): ("1", "1"),
    ("g", "g", "2"): ("2", "2"),
    ("g", "g", "g"): ("g", "g"),
    ("g", "g", "b"): ("g", "b"),
    ("g", "b", "1"): ("1", "1"),
    ("g", "b", "2"): ("2", "2"),
    ("g", "b", "g"): ("g", "g"),
    ("g", "b", "b"): ("g", "b"),
    ("b", "1", "1"): ("1", "b"),
    ("b", "1", "2"): ("2", "b"),
    ("b", "1", "g"): ("1", "b"),
    ("b", "1", "b"): ("1", "b"),
    ("b", "2", "1"): ("1", "b"),
    ("b", "2", "2"): ("2", "b"),
    ("b", "2", "g"): ("2", "b"),
    ("b", "2", "b"): ("2", "b"),
    ("b", "g", "1"): ("1", "b"),
    ("b", "g", "2"): ("2", "b"),
    ("b", "g", "g"): ("b", "b"),
    ("b", "g", "b"): ("b", "b"),
    ("b", "b", "1"): ("1", "b"),
    ("b", "b", "2"): ("2", "b"),
    ("b", "b", "g"): ("b", "b"),
    ("b", "b", "b"): ("b", "b"),
}

ALL_TRIPLES = sorted(TRUTH_TABLE)


def test_truth_table_is_total():
    assert len(TRUTH_TABLE) == 64


def test_speakbench_matches_oracle():
    start = time.monotonic()
    mismatches = [
        (row, fuse_speakbench(d(*row)), R[expected[0]])
        for row, expected in TRUTH_TABLE.items()
        if fuse_speakbench(d(*row)) is not R[expected[0]]
    ]
    assert mismatches == []
    assert time.monotonic() - start < 1.0


def test_s2s_arena_matches_oracle():
    start = time.monotonic()
    mismatches = [
        (row, fuse_s2s_arena(d(*row)), R[expected[1]])
        for row, expected in TRUTH_TABLE.items()
        if fuse_s2s_arena(d(*row)) is not R[expected[1]]
    ]
    assert mismatches == []
    assert time.monotonic() - start < 1.0


def test_speakbench_is_content_first():
    for row in ALL_TRIPLES:
        scores = d(*row)
        if is_winner(scores.content):
            assert fuse_speakbench(scores) is scores.content


def test_s2s_arena_respects_cap():
    for row in ALL_TRIPLES:
        scores = d(*row)
        out = fuse_s2s_arena(scores)
        cap = rating_min(scores.content, scores.paralinguistics)
        # out ⪯ cap in the acceptability product order
        assert rating_min(out, cap) is out
        if Rating.BOTH_BAD in (scores.content, scores.paralinguistics):
            assert out is Rating.BOTH_BAD


def test_s2s_arena_both_good_needs_both_cues_acceptable():
    for row in ALL_TRIPLES:
        scores = d(*row)
        if fuse_s2s_arena(scores) is Rating.BOTH_GOOD:
            assert scores.content is Rating.BOTH_GOOD
            assert scores.paralinguistics is Rating.BOTH_GOOD


def test_s2s_arena_lenient_cap_permits_winner_on_disagreement():
    # strict: cap(1, 2) = both_bad; lenient: neither cue is both_bad
    scores = d("1", "g", "2")
    assert fuse_s2s_arena(scores, cap_mode="strict") is Rating.BOTH_BAD
    assert fuse_s2s_arena(scores, cap_mode="lenient") is Rating.WIN_1
    # lenient still blocks winners when a cue is both_bad outright
    assert fuse_s2s_arena(d("1", "1", "b"), cap_mode="lenient") is Rating.BOTH_BAD


def test_s2s_arena_rejects_unknown_cap_mode():
    with pytest.raises(ValueError):
        fuse_s2s_arena(d("1", "1", "1"), cap_mode="loose")


def test_majority_unanimous_and_two_of_three():
    assert fuse_majority(d("2", "2", "2")) is Rating.WIN_2
    assert fuse_majority(d("1", "1", "2")) is Rating.WIN_1
    assert fuse_majority(d("g", "2", "2")) is Rating.WIN_2
    assert fuse_majority(d("b", "1", "b")) is Rating.BOTH_BAD
    for row in ALL_TRIPLES:
        scores = d(*row)
        values = scores.astuple()
        counted = fuse_majority(scores)
        assert values.count(counted) >= 2 or len(set(values)) == 3


def test_majority_no_majority_falls_back_to_content():
    assert fuse_majority(d("1", "2", "b")) is Rating.WIN_1
    assert fuse_majority(d("g", "1", "b")) is Rating.BOTH_GOOD
    assert fuse_majority(d("b", "2", "g")) is Rating.BOTH_BAD


def test_dispatch():
    for row in ALL_TRIPLES:
        scores = d(*row)
        assert fuse(FusionPolicy.SPEAKBENCH_TREE, scores) is fuse_speakbench(scores)
        assert fuse(FusionPolicy.S2S_ARENA_CAP, scores) is fuse_s2s_arena(scores)
        assert fuse(FusionPolicy.MAJORITY_VOTE, scores) is fuse_majority(scores)


def test_policy_names_match_cli_values():
    assert FusionPolicy.from_name("speakbench_tree") is FusionPolicy.SPEAKBENCH_TREE
    assert FusionPolicy.from_name("s2s_arena_cap") is FusionPolicy.S2S_ARENA_CAP
    assert FusionPolicy.from_name("majority_vote") is FusionPolicy.MAJORITY_VOTE
    with pytest.raises(ValueError):
        FusionPolicy.from_name("bradley_terry")
