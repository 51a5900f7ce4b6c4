"""Token and dollar accounting per judge mode.

Exact component values are kept unrounded internally; display rounding to
3 decimals happens only at the formatting edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class Usage:
    """Token counters for one judge invocation."""

    text_in: int = 0
    audio_in: int = 0
    text_out: int = 0

    def __post_init__(self):
        if min(self.text_in, self.audio_in, self.text_out) < 0:
            raise ValueError("usage counters must be non-negative")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(self.text_in + other.text_in,
                     self.audio_in + other.audio_in,
                     self.text_out + other.text_out)


@dataclass(frozen=True)
class PriceSheet:
    """Per-million token rates plus the GPU rental rate."""

    text_in_per_million: float
    audio_in_per_million: float
    text_out_per_million: float
    gpu_rate_per_hour: float

    def __post_init__(self):
        rates = (self.text_in_per_million, self.audio_in_per_million,
                 self.text_out_per_million, self.gpu_rate_per_hour)
        if any(r < 0 for r in rates):
            raise ValueError("rates must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "PriceSheet":
        return cls(
            text_in_per_million=float(data["text_in_per_million"]),
            audio_in_per_million=float(data["audio_in_per_million"]),
            text_out_per_million=float(data["text_out_per_million"]),
            gpu_rate_per_hour=float(data["gpu_rate_per_hour"]),
        )


@dataclass(frozen=True)
class CostReport:
    gpu_hours: float
    gpu_cost: float
    text_in_cost: float
    audio_in_cost: float
    text_out_cost: float

    @property
    def api_cost(self) -> float:
        return self.text_in_cost + self.audio_in_cost + self.text_out_cost

    @property
    def total(self) -> float:
        return self.gpu_cost + self.api_cost

    def as_dict(self, decimals: int | None = None) -> dict:
        values = {
            "gpu_hours": self.gpu_hours,
            "gpu_cost": self.gpu_cost,
            "text_in_cost": self.text_in_cost,
            "audio_in_cost": self.audio_in_cost,
            "text_out_cost": self.text_out_cost,
            "api_cost": self.api_cost,
            "total": self.total,
        }
        if decimals is not None:
            values = {k: round(v, decimals) for k, v in values.items()}
        return values


def accumulate(usages: Iterable[Usage], gpu_hours: float,
               sheet: PriceSheet) -> CostReport:
    """Sum usage across runs and price the components."""
    total = Usage()
    for u in usages:
        total = total + u
    return CostReport(
        gpu_hours=gpu_hours,
        gpu_cost=gpu_hours * sheet.gpu_rate_per_hour,
        text_in_cost=total.text_in / 1e6 * sheet.text_in_per_million,
        audio_in_cost=total.audio_in / 1e6 * sheet.audio_in_per_million,
        text_out_cost=total.text_out / 1e6 * sheet.text_out_per_million,
    )


def format_cost_table(reports: dict[str, CostReport]) -> str:
    """Plain-text cost table, 3-decimal display rounding."""
    names = list(reports)
    lines = []
    header = f"{'Cost':<18}" + "".join(f"{n:>14}" for n in names)
    lines.append(header)
    lines.append("-" * len(header))
    rows = [
        ("GPU hours", "gpu_hours"),
        ("GPU ($)", "gpu_cost"),
        ("Text input ($)", "text_in_cost"),
        ("Audio input ($)", "audio_in_cost"),
        ("Text output ($)", "text_out_cost"),
        ("API ($)", "api_cost"),
        ("Total ($)", "total"),
    ]
    for label, key in rows:
        cells = "".join(
            f"{reports[n].as_dict(decimals=3)[key]:>14.3f}" for n in names)
        lines.append(f"{label:<18}" + cells)
    return "\n".join(lines)
