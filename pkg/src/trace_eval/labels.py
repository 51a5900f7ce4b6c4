"""The 4-way typed-tie label space, its acceptability lattice, and collapses.

A rating is either a winner ("1" or "2") or a typed tie that says whether
both responses were acceptable ("both_good") or neither was ("both_bad").
Every rating is equivalent to a pair of per-side acceptability booleans,
and the lattice meet (``rating_min``) is the elementwise AND of those pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class BadLabelError(ValueError):
    """Raised for a string outside the 4-way label space."""


class Rating(enum.Enum):
    """One pairwise rating: a winner or a typed tie."""

    WIN_1 = "1"
    WIN_2 = "2"
    BOTH_GOOD = "both_good"
    BOTH_BAD = "both_bad"

    def __str__(self) -> str:
        return self.value


# Hyphenated spellings are accepted on input; serialization always emits
# the underscore forms.
_PARSE_TABLE = {
    "1": Rating.WIN_1,
    "2": Rating.WIN_2,
    "both_good": Rating.BOTH_GOOD,
    "both-good": Rating.BOTH_GOOD,
    "both_bad": Rating.BOTH_BAD,
    "both-bad": Rating.BOTH_BAD,
}

# Bijection between ratings and (side A acceptable, side B acceptable).
_TO_PAIR = {
    Rating.WIN_1: (True, False),
    Rating.WIN_2: (False, True),
    Rating.BOTH_GOOD: (True, True),
    Rating.BOTH_BAD: (False, False),
}
_FROM_PAIR = {pair: rating for rating, pair in _TO_PAIR.items()}


def parse_rating(text: str) -> Rating:
    """Parse a label string, accepting both underscore and hyphen spellings."""
    key = text.strip().lower()
    try:
        return _PARSE_TABLE[key]
    except KeyError:
        raise BadLabelError(f"not a rating: {text!r}") from None


def acceptability(r: Rating) -> tuple[bool, bool]:
    """Map a rating to its (A acceptable, B acceptable) pair."""
    return _TO_PAIR[r]


def from_acceptability(pair: tuple[bool, bool]) -> Rating:
    """Inverse of :func:`acceptability`."""
    return _FROM_PAIR[(bool(pair[0]), bool(pair[1]))]


def rating_min(a: Rating, b: Rating) -> Rating:
    """Lattice meet: elementwise AND of the two acceptability pairs.

    BOTH_GOOD is the identity and BOTH_BAD is absorbing.
    """
    pa = _TO_PAIR[a]
    pb = _TO_PAIR[b]
    return _FROM_PAIR[(pa[0] and pb[0], pa[1] and pb[1])]


def is_winner(r: Rating) -> bool:
    return r is Rating.WIN_1 or r is Rating.WIN_2


class Arity(enum.Enum):
    """Label-space granularity used for reporting."""

    TWO_WAY = 2
    THREE_WAY = 3
    FOUR_WAY = 4

    @classmethod
    def from_int(cls, n: int) -> "Arity":
        for a in cls:
            if a.value == n:
                return a
        raise ValueError(f"arity must be 2, 3 or 4, got {n}")


class _Dropped:
    """Out-of-band signal for rows excluded by the 2-way collapse.

    Deliberately not a fifth label: callers must handle it explicitly so
    reduced-N reporting stays visible.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DROPPED"


DROPPED = _Dropped()


@dataclass(frozen=True)
class CollapsedLabel:
    arity: Arity
    value: str


def collapse(r: Rating, arity: Arity) -> CollapsedLabel | _Dropped:
    """Collapse a rating for n-way reporting.

    4-way is the identity; 3-way folds both tie types into "tie"; 2-way
    keeps winners only and signals DROPPED for either tie, so callers
    exclude the row and report the reduced N.
    """
    if arity is Arity.FOUR_WAY:
        return CollapsedLabel(arity, r.value)
    if arity is Arity.THREE_WAY:
        return CollapsedLabel(arity, r.value if is_winner(r) else "tie")
    if is_winner(r):
        return CollapsedLabel(arity, r.value)
    return DROPPED


def _default_reasoning() -> dict[str, str]:
    return {"content": "", "vq": "", "para": ""}


@dataclass
class DimScores:
    """One triple of per-dimension ratings plus free-text reasoning.

    The reasoning dict always carries the keys content/vq/para; values may
    be empty strings.
    """

    content: Rating
    voice_quality: Rating
    paralinguistics: Rating
    reasoning: dict[str, str] = field(default_factory=_default_reasoning)

    def __post_init__(self):
        base = _default_reasoning()
        base.update(self.reasoning or {})
        self.reasoning = base

    def astuple(self) -> tuple[Rating, Rating, Rating]:
        return (self.content, self.voice_quality, self.paralinguistics)

    def with_dim(self, dim: str, value: Rating) -> "DimScores":
        """Copy with one dimension replaced; dim is content|vq|para."""
        key = {"content": "content", "vq": "voice_quality",
               "para": "paralinguistics"}[dim]
        return replace(self, **{key: value})


DIMENSIONS = ("content", "vq", "para")
