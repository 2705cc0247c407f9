"""Core domain types: time series, observedness masks, and the imputation boundary.

Everything downstream (training, scoring, metrics) works on the types defined
here. All types are immutable after construction and safe to share across
concurrent readers.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

__all__ = [
    "TimeSeries",
    "MaskMatrix",
    "MaskedSeries",
    "MaskSpec",
    "NormParams",
    "ImputationOracle",
    "CountingOracle",
    "DegenerateMaskError",
    "single_unit_mask",
    "random_missing_mask",
    "apply_mask",
    "zscore_normalize",
    "zscore_denormalize",
    "derive_seed",
]


class DegenerateMaskError(ValueError):
    """A mask would leave nothing observed to condition the imputation on."""


def _as_matrix(values: object) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"series values must be 1-D or 2-D, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A real-valued matrix of shape (steps, dims) with an identity.

    The values array is copied and frozen at construction; 1-D input is
    promoted to a single-dimension matrix.
    """

    id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_matrix(self.values).copy()
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"series {self.id!r}: need at least 1 step and 1 dim, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"series {self.id!r}: values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class MaskMatrix:
    """Binary observedness indicator with 1 = observed, 0 = missing."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"mask must be 1-D or 2-D, got ndim={arr.ndim}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def observed(self) -> np.ndarray:
        return self.entries == 1

    def missing(self) -> np.ndarray:
        return self.entries == 0

    def n_missing(self) -> int:
        return int(self.missing().sum())


@dataclass(frozen=True, eq=False)
class MaskedSeries:
    """What an imputation oracle is shown, plus the withheld original.

    ``series`` carries the sentinel fill (0, in normalized space) at missing
    positions; ``original`` is held by the auditor for loss computation and is
    never passed to the oracle.
    """

    series: TimeSeries
    mask: MaskMatrix
    original: TimeSeries

    def __post_init__(self) -> None:
        if self.series.shape != self.mask.shape or self.original.shape != self.mask.shape:
            raise ValueError(
                f"shape mismatch: series {self.series.shape}, mask {self.mask.shape}, "
                f"original {self.original.shape}"
            )
        obs = self.mask.observed()
        if not np.array_equal(self.series.values[obs], self.original.values[obs]):
            raise ValueError("observed entries of the masked series must equal the original")

    @property
    def id(self) -> str:
        return self.original.id


@dataclass(frozen=True)
class MaskSpec:
    """A contiguous block of hidden steps in one dimension."""

    start: int
    length: int = 1
    dim: int = 0


@dataclass(frozen=True, eq=False)
class NormParams:
    """Per-dimension mean/scale allowing exact inversion of a z-score transform."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        for name in ("mean", "scale"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@runtime_checkable
class ImputationOracle(Protocol):
    """Black-box query interface: masked series in, completed series out."""

    def impute(self, x: MaskedSeries) -> TimeSeries: ...


class CountingOracle:
    """Wraps an oracle and counts queries; the audit's only access channel."""

    def __init__(self, inner: ImputationOracle) -> None:
        self.inner = inner
        self.calls = 0

    def impute(self, x: MaskedSeries) -> TimeSeries:
        self.calls += 1
        return self.inner.impute(x)


def single_unit_mask(x: TimeSeries, spec: MaskSpec) -> MaskedSeries:
    """Hide one contiguous block of ``spec.length`` steps in ``spec.dim``.

    Raises DegenerateMaskError when the block covers every step of the chosen
    dimension (nothing left to condition on), and ValueError for blocks that
    fall outside the series.
    """
    steps, dims = x.shape
    if spec.length < 1:
        raise ValueError(f"block length must be >= 1, got {spec.length}")
    if not 0 <= spec.dim < dims:
        raise ValueError(f"dim {spec.dim} out of range for {dims}-dim series")
    if spec.length >= steps:
        raise DegenerateMaskError(
            f"block length {spec.length} >= series length {steps}: nothing observed to condition on"
        )
    if spec.start < 0 or spec.start + spec.length > steps:
        raise ValueError(
            f"block [{spec.start}, {spec.start + spec.length}) out of range for length {steps}"
        )
    entries = np.ones((steps, dims), dtype=np.uint8)
    entries[spec.start : spec.start + spec.length, spec.dim] = 0
    return apply_mask(x, MaskMatrix(entries))


def random_missing_mask(shape: tuple[int, int], fraction: float, seed: int) -> MaskMatrix:
    """Mask exactly ``round(fraction * steps * dims)`` entries, uniformly without replacement."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    steps, dims = shape
    total = steps * dims
    n_zero = int(round(fraction * total))
    rng = np.random.default_rng(seed)
    flat = np.ones(total, dtype=np.uint8)
    if n_zero > 0:
        flat[rng.choice(total, size=n_zero, replace=False)] = 0
    return MaskMatrix(flat.reshape(steps, dims))


def apply_mask(x: TimeSeries, mask: MaskMatrix) -> MaskedSeries:
    """Zero out masked positions of ``x``; the original is retained for the auditor."""
    if x.shape != mask.shape:
        raise ValueError(f"shape mismatch: series {x.shape} vs mask {mask.shape}")
    filled = np.where(mask.observed(), x.values, 0.0)
    return MaskedSeries(series=TimeSeries(x.id, filled), mask=mask, original=x)


def zscore_normalize(x: TimeSeries) -> tuple[TimeSeries, NormParams]:
    """Standardize each dimension to mean 0 / variance 1 (population).

    Constant dimensions map to all-zeros with a stored scale of 1 so the
    transform is always exactly invertible.
    """
    if x.length * x.dims < 2:
        raise ValueError("need at least 2 values to normalize")
    mean = x.values.mean(axis=0)
    sd = x.values.std(axis=0)  # population
    scale = np.where(sd > 0.0, sd, 1.0)
    normalized = (x.values - mean) / scale
    return TimeSeries(x.id, normalized), NormParams(mean=mean, scale=scale)


def zscore_denormalize(x: TimeSeries, params: NormParams) -> TimeSeries:
    """Invert :func:`zscore_normalize`."""
    return TimeSeries(x.id, x.values * params.scale + params.mean)


def derive_seed(master: int, label: object) -> int:
    """Stable child seed for a named stage of a pipeline."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")
