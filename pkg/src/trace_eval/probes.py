"""Sensitivity diagnostics over judge dimension scores.

P1: content-controlled counterfactual: force content to both_good and see
which delivery dimension resolves the tie. P2: one-at-a-time ablations and
overall flip rates. P3: outcome attribution on the winner and both-bad
truth slices. All probes call the fusion module's functions by reference,
so a single fusion implementation serves the main evaluation and probes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .fusion import FusionPolicy, fuse
from .labels import DimScores, Rating, is_winner
from .stats import EmptySliceError


@dataclass(frozen=True)
class ProbeRow:
    """One example's judge scores plus optional per-dimension reference labels."""

    example_id: str
    scores: DimScores
    truth_dims: DimScores | None = None


@dataclass
class ProbeReport:
    probe: str
    policy: str
    aggregates: dict
    details: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"probe": self.probe, "policy": self.policy,
                "aggregates": self.aggregates, "details": self.details}


_TRUTH_GETTER = {
    "para": lambda d: d.paralinguistics,
    "vq": lambda d: d.voice_quality,
}


def p1_counterfactual(rows: Sequence[ProbeRow], policy: FusionPolicy,
                      cap_mode: str = "strict") -> ProbeReport:
    """Force content to both_good; record the tie-resolving dimension.

    Paralinguistics is checked before voice quality; "tie" means neither
    declared a winner. Decision accuracy of the resolver is measured
    against the reference label of that same dimension on rows where the
    reference is available.
    """
    shares = {"para": 0, "vq": 0, "tie": 0}
    decided = {"para": 0, "vq": 0}
    correct = {"para": 0, "vq": 0}
    details = []
    for row in rows:
        forced = row.scores.with_dim("content", Rating.BOTH_GOOD)
        fused = fuse(policy, forced, cap_mode=cap_mode)
        if is_winner(row.scores.paralinguistics):
            resolver = "para"
        elif is_winner(row.scores.voice_quality):
            resolver = "vq"
        else:
            resolver = "tie"
        shares[resolver] += 1
        hit = None
        if resolver != "tie" and row.truth_dims is not None:
            decided[resolver] += 1
            truth = _TRUTH_GETTER[resolver](row.truth_dims)
            judged = _TRUTH_GETTER[resolver](row.scores)
            hit = judged is truth
            correct[resolver] += hit
        details.append({"example_id": row.example_id, "resolver": resolver,
                        "forced_overall": fused.value, "resolver_correct": hit})
    n = len(rows)
    aggregates = {
        "n": n,
        "resolver_shares": {k: (v / n if n else 0.0) for k, v in shares.items()},
        "resolver_counts": shares,
        "decision_accuracy": {
            k: (correct[k] / decided[k] if decided[k] else None)
            for k in ("para", "vq")
        },
    }
    return ProbeReport("p1", policy.value, aggregates, details)


def p2_flip_rates(rows: Sequence[ProbeRow], policy: FusionPolicy,
                  cap_mode: str = "strict") -> ProbeReport:
    """Flip rate per dimension: how often forcing it to both_good changes
    the fused overall."""
    flips = {"content": 0, "vq": 0, "para": 0}
    details = []
    for row in rows:
        base = fuse(policy, row.scores, cap_mode=cap_mode)
        row_flips = {}
        for dim in ("content", "vq", "para"):
            perturbed = fuse(policy, row.scores.with_dim(dim, Rating.BOTH_GOOD),
                             cap_mode=cap_mode)
            flipped = perturbed is not base
            row_flips[dim] = flipped
            flips[dim] += flipped
        details.append({"example_id": row.example_id,
                        "base_overall": base.value, "flips": row_flips})
    n = len(rows)
    aggregates = {
        "n": n,
        "flip_rates": {k: (v / n if n else 0.0) for k, v in flips.items()},
        "flip_counts": flips,
    }
    return ProbeReport("p2", policy.value, aggregates, details)


def p3_attribution(predictions: Sequence[Rating], truths: Sequence[Rating],
                   policy: FusionPolicy | None = None) -> ProbeReport:
    """Winner-on-bad rate and winner-slice accuracy of fused predictions."""
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths must have equal length")
    bad_rows = [(p, t) for p, t in zip(predictions, truths)
                if t is Rating.BOTH_BAD]
    winner_rows = [(p, t) for p, t in zip(predictions, truths) if is_winner(t)]
    if not bad_rows:
        raise EmptySliceError("no rows with both_bad truth")
    if not winner_rows:
        raise EmptySliceError("no rows with a winner truth")
    winner_on_bad = sum(is_winner(p) for p, _ in bad_rows) / len(bad_rows)
    winner_slice_acc = sum(p is t for p, t in winner_rows) / len(winner_rows)
    aggregates = {
        "winner_on_bad": winner_on_bad,
        "winner_on_bad_n": len(bad_rows),
        "winner_slice_accuracy": winner_slice_acc,
        "winner_slice_n": len(winner_rows),
    }
    details = [{"prediction": p.value, "truth": t.value}
               for p, t in zip(predictions, truths)]
    return ProbeReport("p3", policy.value if policy else "", aggregates, details)
