"""Dynamic time warping, the loss the audit scores oracle outputs with.

``dtw_distance`` is the production dynamic program; ``dtw_brute_force``
enumerates every alignment path and exists so the dynamic program can be
checked against something dumber than itself.
"""
from __future__ import annotations

import numpy as np

from .core import TimeSeries, _as_matrix

__all__ = ["dtw_distance", "dtw_brute_force", "BRUTE_FORCE_CELL_LIMIT"]

# n*m above this and exhaustive path enumeration stops being a test oracle
# and starts being a space heater.
BRUTE_FORCE_CELL_LIMIT = 36


def _values(x: TimeSeries | np.ndarray | list) -> np.ndarray:
    arr = x.values if isinstance(x, TimeSeries) else _as_matrix(x)
    if arr.shape[0] < 1:
        raise ValueError("series must be nonempty")
    return np.asarray(arr, dtype=np.float64)


def _point_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Euclidean distance between D-dim points; |a_i - b_j| when D == 1.
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def dtw_distance(a: TimeSeries | np.ndarray, b: TimeSeries | np.ndarray, band: int | None = None) -> float:
    """Minimal accumulated pointwise distance over monotone alignments.

    Standard O(n*m) dynamic program with the step set {down, right, diagonal},
    boundary-anchored at both ends. Dimensions share one alignment and the
    pointwise cost is the Euclidean distance between the aligned points.

    ``band`` optionally restricts the alignment to |i - j| <= band around the
    diagonal (off by default; only useful as a speed knob on long series).
    """
    va, vb = _values(a), _values(b)
    if va.shape[1] != vb.shape[1]:
        raise ValueError(f"dimension mismatch: {va.shape[1]} vs {vb.shape[1]}")
    if band is not None and band < 0:
        raise ValueError(f"band must be nonnegative, got {band}")
    n, m = va.shape[0], vb.shape[0]
    if band is not None and band < abs(n - m):
        raise ValueError(f"band {band} cannot reach the corner for lengths {n}, {m}")

    costs = _point_costs(va, vb).tolist()
    inf = float("inf")
    prev = [inf] * (m + 1)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = [inf] * (m + 1)
        row = costs[i - 1]
        lo = 1 if band is None else max(1, i - band)
        hi = m if band is None else min(m, i + band)
        for j in range(lo, hi + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = row[j - 1] + best
        prev = cur
    return float(prev[m])


def dtw_brute_force(a: TimeSeries | np.ndarray, b: TimeSeries | np.ndarray) -> float:
    """Exhaustively enumerate every monotone alignment path and take the minimum.

    Refuses inputs with n*m > BRUTE_FORCE_CELL_LIMIT; enumeration is
    exponential and only meant to cross-check :func:`dtw_distance` on tiny
    series.
    """
    va, vb = _values(a), _values(b)
    if va.shape[1] != vb.shape[1]:
        raise ValueError(f"dimension mismatch: {va.shape[1]} vs {vb.shape[1]}")
    n, m = va.shape[0], vb.shape[0]
    if n * m > BRUTE_FORCE_CELL_LIMIT:
        raise ValueError(f"refusing exhaustive enumeration for {n}x{m} > {BRUTE_FORCE_CELL_LIMIT} cells")

    costs = _point_costs(va, vb)
    best = float("inf")

    def walk(i: int, j: int, acc: float) -> None:
        nonlocal best
        acc += costs[i, j]
        if i == n - 1 and j == m - 1:
            if acc < best:
                best = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best
