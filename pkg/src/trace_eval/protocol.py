"""The five-step hybrid rating procedure and its server-side validation.

Each dimension is rated by first deciding per-side acceptability and only
then comparing: exactly one acceptable side forces that winner; two
unacceptable sides force both_bad; two acceptable sides permit a winner or
both_good. A submitted step trace replays this procedure so stored records
can never contradict it, regardless of client correctness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .labels import BadLabelError, DimScores, Rating, parse_rating

DIM_ORDER = ("content", "vq", "para", "overall")


class PassKind(enum.Enum):
    BLIND_OVERALL_FIRST = "blind"
    HCOT = "hcot"
    HCOT_RESAMPLE = "hcot_resample"

    @classmethod
    def from_name(cls, name: str) -> "PassKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown pass kind {name!r}")

    @property
    def dims(self) -> tuple[str, ...]:
        if self is PassKind.BLIND_OVERALL_FIRST:
            return ("overall",)
        return DIM_ORDER


@dataclass(frozen=True)
class ProtocolViolation:
    step: str
    message: str

    def as_dict(self) -> dict:
        return {"step": self.step, "message": self.message}


def _entry_violation(entry: dict) -> ProtocolViolation | None:
    """Steps 1-5 for one dimension: acceptability first, then comparison."""
    a_ok = entry.get("acceptable_a")
    b_ok = entry.get("acceptable_b")
    if not isinstance(a_ok, bool) or not isinstance(b_ok, bool):
        return ProtocolViolation(
            "step_1_2", f"{entry.get('dim')}: per-side acceptability must "
            "be decided before rating")
    try:
        rating = parse_rating(entry.get("rating", ""))
    except (BadLabelError, TypeError):
        return ProtocolViolation(
            "label", f"{entry.get('dim')}: rating outside the label space")
    if a_ok != b_ok:
        forced = Rating.WIN_1 if a_ok else Rating.WIN_2
        if rating is not forced:
            return ProtocolViolation(
                "step_3", f"{entry['dim']}: exactly one side acceptable "
                f"forces {forced.value!r}, got {rating.value!r}")
    elif not a_ok:
        if rating is not Rating.BOTH_BAD:
            return ProtocolViolation(
                "step_4", f"{entry['dim']}: both sides unacceptable forces "
                f"'both_bad', got {rating.value!r}")
    else:
        if rating is Rating.BOTH_BAD:
            return ProtocolViolation(
                "step_5", f"{entry['dim']}: both sides acceptable permits a "
                "winner or 'both_good', not 'both_bad'")
    return None


def validate_step_trace(pass_kind: PassKind,
                        entries: list[dict]) -> list[ProtocolViolation]:
    """All protocol violations in a submitted trace (empty list = valid)."""
    violations: list[ProtocolViolation] = []
    dims = [e.get("dim") for e in entries]
    expected = list(pass_kind.dims)
    if dims != expected:
        violations.append(ProtocolViolation(
            "dimension_order",
            f"{pass_kind.value} pass must rate {expected} in order, "
            f"got {dims}"))
    times = [e.get("t") for e in entries]
    if any(not isinstance(t, (int, float)) for t in times):
        violations.append(ProtocolViolation(
            "timestamps", "every step needs a commit timestamp"))
    elif any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        violations.append(ProtocolViolation(
            "timestamps", "step timestamps must strictly increase "
            "(dimensions before overall)"))
    for entry in entries:
        violation = _entry_violation(entry)
        if violation is not None:
            violations.append(violation)
    return violations


def trace_ratings(entries: list[dict]) -> dict[str, Rating]:
    """Dimension -> rating map from a (valid) trace."""
    return {e["dim"]: parse_rating(e["rating"]) for e in entries}


def dims_from_trace(entries: list[dict]) -> DimScores | None:
    """DimScores for an HCoT trace; None for a blind trace."""
    ratings = trace_ratings(entries)
    if set(ratings) == {"overall"}:
        return None
    return DimScores(content=ratings["content"],
                     voice_quality=ratings["vq"],
                     paralinguistics=ratings["para"])
