"""Exact stop-loss distance ``sup_z |E(X - z)^+ - E(Y - z)^+|`` between integer laws.

The difference of the two call curves is piecewise linear in ``z`` with kinks
only at integers, equals ``EX - EY`` for ``z <= 0`` and vanishes beyond the
larger support, so its modulus peaks at an integer in ``[0, m]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pmf import IntegerPMF, call_curve, call_expectation


@dataclass(frozen=True)
class StopLossCurve:
    z_grid: np.ndarray
    diffs: np.ndarray
    sup_abs: float
    argsup: float


def stoploss_distance_exact(px: IntegerPMF, py: IntegerPMF) -> StopLossCurve:
    m = max(len(px), len(py))
    cx = call_curve(px, m + 1)
    cy = call_curve(py, m + 1)
    diffs = cx - cy
    z_grid = np.arange(m + 1, dtype=float)
    mags = np.abs(diffs)
    idx = int(np.argmax(mags))  # first maximiser: ties go to the smallest z
    return StopLossCurve(z_grid, diffs, float(mags[idx]), float(z_grid[idx]))


def stoploss_distance(px: IntegerPMF, py: IntegerPMF) -> float:
    return stoploss_distance_exact(px, py).sup_abs


def stoploss_distance_grid_check(px: IntegerPMF, py: IntegerPMF, resolution: int = 1000) -> float:
    """Brute-force sup over ``resolution`` points per unit on ``[-1, m + 1]``.

    Independent of the kink argument: evaluates both call functions directly.
    Agreement with the exact value is expected within ``2 / resolution``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    m = max(len(px), len(py)) - 1
    zs = np.linspace(-1.0, m + 1.0, (m + 2) * resolution + 1)
    kx = np.arange(len(px), dtype=float)
    ky = np.arange(len(py), dtype=float)
    best = 0.0
    for chunk in np.array_split(zs, max(1, zs.size // 4096)):
        ex = (np.maximum(kx[None, :] - chunk[:, None], 0.0) * px.probs).sum(axis=1)
        ey = (np.maximum(ky[None, :] - chunk[:, None], 0.0) * py.probs).sum(axis=1)
        best = max(best, float(np.abs(ex - ey).max()))
    return best


def call_difference(px: IntegerPMF, py: IntegerPMF, z: float) -> float:
    return call_expectation(px, z) - call_expectation(py, z)
