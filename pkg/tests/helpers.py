"""Stub oracles and brute-force statistics shared across the test suite.

The stubs here deliberately bypass the production model code so that attack
and metric tests check the pipeline against arithmetic, not against the
trainer.
"""
from __future__ import annotations

import numpy as np

from imputeaudit.core import MaskedSeries, TimeSeries


class PerfectOracle:
    """Returns the withheld original: a model with perfect memory."""

    def impute(self, x: MaskedSeries) -> TimeSeries:
        return x.original


class OffsetOracle:
    """Keep-observed oracle that misses every hidden entry by a fixed offset."""

    def __init__(self, offset: float) -> None:
        self.offset = offset

    def impute(self, x: MaskedSeries) -> TimeSeries:
        filled = np.where(x.mask.observed(), x.original.values, x.original.values + self.offset)
        return TimeSeries(x.id, filled)


class ZeroFillOracle:
    """Predicts 0 (the normalized mean) at every hidden entry."""

    def impute(self, x: MaskedSeries) -> TimeSeries:
        return x.series


class FailingOracle:
    def impute(self, x: MaskedSeries) -> TimeSeries:
        raise RuntimeError("deliberately broken oracle")


class RecordingOracle:
    """ZeroFill behavior, but remembers every masked view it was shown."""

    def __init__(self) -> None:
        self.seen: list[MaskedSeries] = []

    def impute(self, x: MaskedSeries) -> TimeSeries:
        self.seen.append(x)
        return x.series


def mann_whitney(scores: np.ndarray, is_member: np.ndarray) -> float:
    """P(member score < nonmember score) + 0.5 P(tie), by exhaustive pairing."""
    members = scores[is_member]
    nonmembers = scores[~is_member]
    less = (members[:, None] < nonmembers[None, :]).sum()
    ties = (members[:, None] == nonmembers[None, :]).sum()
    return float((less + 0.5 * ties) / (members.size * nonmembers.size))
