"""Deterministic fusion policies mapping dimension triples to an overall rating.

Three policies are shipped, selected per dataset as a configuration key:

* ``speakbench_tree``: content decides; paralinguistics then voice quality
  break content ties; a double tie keeps the content tie value.
* ``s2s_arena_cap``: the overall rating is capped by the acceptability
  meet of content and paralinguistics, so a both_bad cue can never be
  outvoted into a winner.
* ``majority_vote``: baseline majority among the three dimensions.
"""

from __future__ import annotations

import enum

from .labels import DimScores, Rating, is_winner, rating_min


class FusionPolicy(enum.Enum):
    SPEAKBENCH_TREE = "speakbench_tree"
    S2S_ARENA_CAP = "s2s_arena_cap"
    MAJORITY_VOTE = "majority_vote"

    @classmethod
    def from_name(cls, name: str) -> "FusionPolicy":
        for p in cls:
            if p.value == name:
                return p
        raise ValueError(
            f"unknown fusion policy {name!r}; expected one of "
            f"{[p.value for p in cls]}"
        )


def fuse_speakbench(d: DimScores) -> Rating:
    """Content-first tree with paralinguistics/voice-quality tie-breaks."""
    c, vq, p = d.astuple()
    if is_winner(c):
        return c
    # Content tied: the same tie-break ladder applies to both tie types,
    # falling back to the content tie value.
    if is_winner(p):
        return p
    if is_winner(vq):
        return vq
    return c


def fuse_s2s_arena(d: DimScores, cap_mode: str = "strict") -> Rating:
    """Acceptability-capped tree: overall ⪯ min(content, paralinguistics).

    ``cap_mode="lenient"`` is a diagnostic variant that only engages the
    cap when a capped cue is BOTH_BAD outright, permitting winners when
    both cues are merely in disagreement.
    """
    c, vq, p = d.astuple()
    if cap_mode == "strict":
        cap = rating_min(c, p)
    elif cap_mode == "lenient":
        cap = (Rating.BOTH_BAD
               if Rating.BOTH_BAD in (c, p) else Rating.BOTH_GOOD)
    else:
        raise ValueError(f"cap_mode must be strict or lenient, got {cap_mode!r}")
    for candidate in (c, p, vq):
        if is_winner(candidate):
            return rating_min(candidate, cap)
    return rating_min(c, cap)


# Tie-break priority when no majority exists. Content first mirrors the
# content-weighted original labels of both benchmarks; the rule is a frozen
# configuration default, not inferred from data.
MAJORITY_TIE_BREAK = ("content", "para", "vq")

_DIM_GETTERS = {
    "content": lambda d: d.content,
    "vq": lambda d: d.voice_quality,
    "para": lambda d: d.paralinguistics,
}


def fuse_majority(d: DimScores,
                  tie_break: tuple[str, ...] = MAJORITY_TIE_BREAK) -> Rating:
    """Majority vote over the three dimensions.

    When all three dimensions disagree the configured priority order
    decides; the default returns the content rating.
    """
    votes = d.astuple()
    for value in votes:
        if votes.count(value) >= 2:
            return value
    return _DIM_GETTERS[tie_break[0]](d)


def fuse(policy: FusionPolicy, d: DimScores, cap_mode: str = "strict") -> Rating:
    """Dispatch to the policy's fusion function."""
    if policy is FusionPolicy.SPEAKBENCH_TREE:
        return fuse_speakbench(d)
    if policy is FusionPolicy.S2S_ARENA_CAP:
        return fuse_s2s_arena(d, cap_mode=cap_mode)
    if policy is FusionPolicy.MAJORITY_VOTE:
        return fuse_majority(d)
    raise ValueError(f"unknown fusion policy: {policy!r}")
