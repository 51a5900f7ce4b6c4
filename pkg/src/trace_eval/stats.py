"""Evaluation statistics: n-way accuracy, paired bootstrap CIs, Cohen's κ,
exact McNemar tests, and frequency-weighted confusion summaries.

All resampling is percentile-bootstrap over example rows with a seeded,
splittable generator; intervals are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .labels import DROPPED, Arity, Rating, collapse

DEFAULT_REPLICATES = 10_000
DEFAULT_LEVEL = 0.95

RATING_ORDER = (Rating.WIN_1, Rating.WIN_2, Rating.BOTH_GOOD, Rating.BOTH_BAD)


class EmptyAfterCollapseError(ValueError):
    """No rows remain once the arity collapse drops tie-truth examples."""


class DegenerateKappaError(ValueError):
    """Chance agreement is 1: both raters are constant and identical."""


class EmptySliceError(ValueError):
    """A conditioning slice contains no rows."""


@dataclass(frozen=True)
class PairedRow:
    """One example with its reference label and per-system predictions."""

    example_id: str
    truth: Rating
    predictions: Mapping[str, Rating]


@dataclass(frozen=True)
class ConfidenceInterval:
    point: float
    lo: float
    hi: float
    level: float = DEFAULT_LEVEL
    replicates: int = DEFAULT_REPLICATES
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise ValueError(f"level must be in (0,1), got {self.level}")
        if not (self.lo <= self.point <= self.hi):
            raise ValueError(
                f"interval [{self.lo}, {self.hi}] does not bracket "
                f"point {self.point}")

    def as_dict(self) -> dict:
        return {"point": self.point, "lo": self.lo, "hi": self.hi,
                "level": self.level, "replicates": self.replicates,
                "seed": self.seed}


def _collapse_value(r: Rating, arity: Arity) -> str | None:
    out = collapse(r, arity)
    return None if out is DROPPED else out.value


def match_indicators(rows: Sequence[PairedRow], system: str,
                     arity: Arity) -> tuple[np.ndarray, np.ndarray]:
    """Per-row exact-match indicators plus the retained-row mask.

    Rows whose truth collapses to DROPPED (2-way ties) are excluded; a
    prediction that collapses to DROPPED on a retained row counts as a miss.
    """
    retained = np.zeros(len(rows), dtype=bool)
    correct = np.zeros(len(rows), dtype=bool)
    for i, row in enumerate(rows):
        truth = _collapse_value(row.truth, arity)
        if truth is None:
            continue
        retained[i] = True
        pred = _collapse_value(row.predictions[system], arity)
        correct[i] = pred == truth
    return correct, retained


def accuracy(rows: Sequence[PairedRow], system: str,
             arity: Arity = Arity.FOUR_WAY) -> tuple[float, int]:
    """Exact-match accuracy and the retained N after the arity collapse."""
    correct, retained = match_indicators(rows, system, arity)
    n = int(retained.sum())
    if n == 0:
        raise EmptyAfterCollapseError(
            f"no rows retained for {system!r} at {arity.value}-way")
    return float(correct[retained].mean()), n


def bootstrap_ci(n_rows: int, statistic: Callable[[np.ndarray], float],
                 replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                 level: float = DEFAULT_LEVEL, workers: int = 1,
                 ) -> ConfidenceInterval:
    """Percentile bootstrap over row indices.

    ``statistic`` receives an index array into the row set (the identity
    permutation for the point estimate, resampled-with-replacement indices
    per replicate) so example-wise pairing across systems is preserved.
    Replicates are generated from spawned child seeds per chunk; the
    percentile is taken after a full sort, so results do not depend on
    worker scheduling.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if n_rows < 1:
        raise ValueError("need at least one row")
    point = float(statistic(np.arange(n_rows)))

    chunk = 512
    n_chunks = (replicates + chunk - 1) // chunk
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)

    def run_chunk(args) -> np.ndarray:
        child, count = args
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n_rows, size=(count, n_rows))
        return np.array([statistic(idx[j]) for j in range(count)])

    sizes = [chunk] * (n_chunks - 1) + [replicates - chunk * (n_chunks - 1)]
    jobs = list(zip(seeds, sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, jobs))
    else:
        parts = [run_chunk(job) for job in jobs]
    stats = np.sort(np.concatenate(parts))
    # Replicates that carry no information (e.g. a resample where every
    # row dropped under the 2-way collapse) report NaN and are excluded.
    stats = stats[~np.isnan(stats)]
    alpha = (1.0 - level) / 2.0
    if stats.size == 0:
        lo = hi = point
    else:
        lo = float(np.percentile(stats, 100.0 * alpha))
        hi = float(np.percentile(stats, 100.0 * (1.0 - alpha)))
    # min/max only guards float-equality edges; percentile intervals of
    # row-mean statistics bracket the full-sample point otherwise.
    return ConfidenceInterval(point=point, lo=min(lo, point),
                              hi=max(hi, point), level=level,
                              replicates=replicates, seed=seed)


def accuracy_with_ci(rows: Sequence[PairedRow], system: str,
                     arity: Arity = Arity.FOUR_WAY,
                     replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                     level: float = DEFAULT_LEVEL,
                     ) -> tuple[ConfidenceInterval, int]:
    """Accuracy with a paired-bootstrap CI; resampling keeps whole rows."""
    correct, retained = match_indicators(rows, system, arity)
    if not retained.any():
        raise EmptyAfterCollapseError(
            f"no rows retained for {system!r} at {arity.value}-way")

    def stat(idx: np.ndarray) -> float:
        keep = retained[idx]
        if not keep.any():
            return float("nan")
        return float(correct[idx][keep].mean())

    ci = bootstrap_ci(len(rows), stat, replicates=replicates, seed=seed,
                      level=level)
    return ci, int(retained.sum())


def cohen_kappa(labels_a: Sequence[Rating], labels_b: Sequence[Rating],
                arity: Arity = Arity.FOUR_WAY,
                replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                level: float = DEFAULT_LEVEL,
                ) -> tuple[float, ConfidenceInterval, int]:
    """Chance-corrected agreement κ = (p_o - p_e) / (1 - p_e).

    p_e comes from the two raters' marginals. Returns (κ, bootstrap CI,
    retained N). For the 2-way collapse, rows where either rater's label
    drops are excluded from both sequences.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences must have equal length")
    pairs = []
    for a, b in zip(labels_a, labels_b):
        ca, cb = _collapse_value(a, arity), _collapse_value(b, arity)
        if ca is None or cb is None:
            continue
        pairs.append((ca, cb))
    if not pairs:
        raise EmptyAfterCollapseError("no rows retained after collapse")

    categories = sorted({c for pair in pairs for c in pair})
    cat_index = {c: i for i, c in enumerate(categories)}
    a_idx = np.array([cat_index[a] for a, _ in pairs])
    b_idx = np.array([cat_index[b] for _, b in pairs])

    def kappa_of(idx: np.ndarray) -> float:
        a, b = a_idx[idx], b_idx[idx]
        n = len(a)
        p_o = float(np.mean(a == b))
        p_e = 0.0
        for k in range(len(categories)):
            p_e += float(np.mean(a == k)) * float(np.mean(b == k))
        if p_e >= 1.0:
            return 1.0 if p_o >= 1.0 else 0.0
        return (p_o - p_e) / (1.0 - p_e)

    full = np.arange(len(pairs))
    p_e_full = sum(
        float(np.mean(a_idx == k)) * float(np.mean(b_idx == k))
        for k in range(len(categories)))
    if p_e_full >= 1.0:
        raise DegenerateKappaError(
            "both raters are constant and identical; kappa undefined")
    kappa = kappa_of(full)
    ci = bootstrap_ci(len(pairs), kappa_of, replicates=replicates,
                      seed=seed, level=level)
    return kappa, ci, len(pairs)


def agreement(labels_a: Sequence[Rating], labels_b: Sequence[Rating],
              arity: Arity) -> tuple[float, int]:
    """Raw agreement between two symmetric label sets.

    2-way drops a row when either side's label is a tie, mirroring the
    winners-only reduced-N reporting.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences must have equal length")
    kept = 0
    hits = 0
    for a, b in zip(labels_a, labels_b):
        ca, cb = _collapse_value(a, arity), _collapse_value(b, arity)
        if ca is None or cb is None:
            continue
        kept += 1
        hits += ca == cb
    if kept == 0:
        raise EmptyAfterCollapseError("no rows retained after collapse")
    return hits / kept, kept


@dataclass(frozen=True)
class McNemarResult:
    p_value: float
    b: int  # first system correct, second wrong
    c: int  # second system correct, first wrong
    no_discordant: bool = False


def mcnemar(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> McNemarResult:
    """Exact two-sided binomial McNemar test on discordant pairs.

    p = 2 * P(X <= min(b, c)) for X ~ Binomial(b + c, 1/2), capped at 1.
    b + c = 0 yields p = 1.0 with the no_discordant flag set.
    """
    if len(correct_a) != len(correct_b):
        raise ValueError("correctness vectors must have equal length")
    b = sum(1 for x, y in zip(correct_a, correct_b) if x and not y)
    c = sum(1 for x, y in zip(correct_a, correct_b) if y and not x)
    n = b + c
    if n == 0:
        return McNemarResult(p_value=1.0, b=b, c=c, no_discordant=True)
    k = min(b, c)
    tail = sum(math.comb(n, i) for i in range(k + 1)) / (2 ** n)
    return McNemarResult(p_value=min(1.0, 2.0 * tail), b=b, c=c)


@dataclass(frozen=True)
class ConfusionReport:
    """4-way confusion counts with class-frequency-weighted precision/recall."""

    matrix: tuple[tuple[int, ...], ...]  # rows = truth, cols = prediction
    labels: tuple[str, ...]
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    weighted_precision: float
    weighted_recall: float
    n: int

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "matrix": [list(row) for row in self.matrix],
            "per_class_precision": list(self.per_class_precision),
            "per_class_recall": list(self.per_class_recall),
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "n": self.n,
        }


def confusion(rows: Sequence[PairedRow], system: str) -> ConfusionReport:
    """4-way confusion matrix; weights are true-class frequencies."""
    index = {r: i for i, r in enumerate(RATING_ORDER)}
    mat = np.zeros((4, 4), dtype=int)
    for row in rows:
        mat[index[row.truth], index[row.predictions[system]]] += 1
    n = int(mat.sum())
    row_sums = mat.sum(axis=1)
    col_sums = mat.sum(axis=0)
    diag = np.diag(mat)
    precision = np.divide(diag, col_sums, out=np.zeros(4, dtype=float),
                          where=col_sums > 0)
    recall = np.divide(diag, row_sums, out=np.zeros(4, dtype=float),
                       where=row_sums > 0)
    weights = row_sums / n if n else np.zeros(4)
    return ConfusionReport(
        matrix=tuple(tuple(int(v) for v in r) for r in mat),
        labels=tuple(r.value for r in RATING_ORDER),
        per_class_precision=tuple(float(p) for p in precision),
        per_class_recall=tuple(float(r) for r in recall),
        weighted_precision=float((weights * precision).sum()),
        weighted_recall=float((weights * recall).sum()),
        n=n,
    )
