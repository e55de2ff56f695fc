"""Tick series container shared by all estimators.

Times are in years (trading-time convention: 1 year = 252 days of
23,400 seconds). Data outside the session window is edge data used by
the realized kernel for out-of-window autocovariance lags.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: trading seconds per year (252 days x 6.5 hours)
SECONDS_PER_YEAR = 252 * 23_400

#: one trading day in years
DAY = 1.0 / 252.0


def seconds_to_years(s):
    return np.asarray(s, dtype=float) / SECONDS_PER_YEAR


@dataclass
class TickSeries:
    """Ordered (time, observed log-price) pairs plus a session window."""

    times: np.ndarray
    logprices: np.ndarray
    session_start: float = 0.0
    session_end: float = DAY
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.logprices = np.asarray(self.logprices, dtype=float)
        if self.times.shape != self.logprices.shape:
            raise ValueError("times and logprices must have equal length")
        if self.times.size >= 2 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.session_end <= self.session_start:
            raise ValueError("empty session window")

    @property
    def session_span(self) -> float:
        return self.session_end - self.session_start

    def session_indices(self) -> tuple[int, int]:
        """Inclusive index range [i0, i1] of observations inside the session."""
        i0 = int(np.searchsorted(self.times, self.session_start, side="left"))
        i1 = int(np.searchsorted(self.times, self.session_end, side="right")) - 1
        if i1 - i0 < 1:
            raise ValueError("fewer than two observations in the session window")
        return i0, i1

    @property
    def n_returns(self) -> int:
        i0, i1 = self.session_indices()
        return i1 - i0

    def boundary_index(self, t: float) -> int:
        """Index of the last observation at or before time t."""
        return int(np.searchsorted(self.times, t, side="right")) - 1
