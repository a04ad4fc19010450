"""Return series container shared by the simulator, filters, and CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class ReturnSeries:
    """An ordered series of (percent, demeaned) returns.

    Labels are whatever the data came with: dates, integers, or plain
    strings. They must be strictly increasing and are used only for
    ordering and reporting; all inference runs on positions.
    """

    labels: list = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 1:
            raise ValueError("returns must form a 1-d array")
        if len(self.labels) != self.y.size:
            raise ValueError(
                f"{len(self.labels)} labels for {self.y.size} observations"
            )
        if self.y.size < 1:
            raise ValueError("a return series cannot be empty")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("return series contains non-finite entries")
        for a, b in zip(self.labels, self.labels[1:]):
            if not a < b:
                raise ValueError(f"labels not strictly increasing at {a!r} -> {b!r}")

    def __len__(self) -> int:
        return int(self.y.size)
