"""Partially observed and noisy Harris paths.

Masks are unions of closed intervals in path-index units (``[0, 2n]``). The
restricted estimator fits ``2 lambda E`` only on the observed part of the
path; pieces cut by a mask boundary are interpolated linearly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimators import linear_pieces_against_mean, mean_squared_integral
from .simulate import make_rng
from .trees import HarrisPath


class OutOfRange(ValueError):
    pass


class FullMask(ValueError):
    pass


class DegenerateMask(FullMask):
    """Raised when estimating from an observation flagged ``degenerate``."""


def normalize_intervals(intervals, upper: float | None = None) -> np.ndarray:
    """Sorted, merged ``(k, 2)`` array of closed intervals."""
    iv = np.asarray(list(intervals), dtype=float).reshape(-1, 2)
    if iv.size == 0:
        return np.zeros((0, 2))
    if np.any(iv[:, 0] > iv[:, 1]):
        raise OutOfRange("interval lower end exceeds upper end")
    if np.any(iv < 0) or (upper is not None and np.any(iv > upper)):
        raise OutOfRange(f"intervals must lie within [0, {upper}]")
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    merged = [iv[0].tolist()]
    for lo, hi in iv[1:].tolist():
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return np.array(merged)


@dataclass(frozen=True, eq=False)
class MaskedHarrisPath:
    """A Harris path seen through a mask and/or additive noise.

    ``degenerate`` flags observations whose visible part has zero length.
    """

    path: HarrisPath
    mask: np.ndarray
    noise: np.ndarray | None = None
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.path.n

    @property
    def values(self) -> np.ndarray:
        v = self.path.walk.astype(float)
        return v if self.noise is None else v + self.noise

    @property
    def masked_length(self) -> float:
        return float(np.sum(self.mask[:, 1] - self.mask[:, 0])) if self.mask.size else 0.0

    def observed_intervals(self) -> np.ndarray:
        """Complement of the mask in ``[0, 2n]``; zero-length pieces are dropped."""
        edges = [0.0]
        for lo, hi in self.mask.tolist():
            edges.extend([lo, hi])
        edges.append(2.0 * self.n)
        pieces = np.array(edges).reshape(-1, 2)
        return pieces[pieces[:, 1] > pieces[:, 0]]


def _masked(path: HarrisPath, intervals, noise=None) -> MaskedHarrisPath:
    mask = normalize_intervals(intervals, 2 * path.n)
    m = MaskedHarrisPath(path, mask, noise)
    degenerate = m.observed_intervals().shape[0] == 0
    return MaskedHarrisPath(path, mask, noise, degenerate)


def leaf_peaks(path: HarrisPath) -> np.ndarray:
    """Indices ``i`` with ``walk[i-1] = walk[i+1] = walk[i] - 1``."""
    w = path.walk
    mid = w[1:-1]
    return np.flatnonzero((w[:-2] == mid - 1) & (w[2:] == mid - 1)) + 1


def hide_leaves(path: HarrisPath) -> MaskedHarrisPath:
    peaks = leaf_peaks(path)
    return _masked(path, np.column_stack([peaks - 1, peaks + 1]))


def mask_intervals(path: HarrisPath, intervals) -> MaskedHarrisPath:
    m = _masked(path, intervals)
    if m.degenerate:
        raise FullMask("the mask hides the whole path")
    return m


def observe_intervals(path: HarrisPath, observed) -> MaskedHarrisPath:
    """Mask everything outside the given observed intervals."""
    obs = normalize_intervals(observed, 2 * path.n)
    edges = np.concatenate([[0.0], obs.ravel(), [2.0 * path.n]]).reshape(-1, 2)
    return mask_intervals(path, edges[edges[:, 1] > edges[:, 0]])


def add_gaussian_noise(path: HarrisPath, stddev: float, rng=None) -> MaskedHarrisPath:
    if stddev < 0:
        raise OutOfRange("stddev must be nonnegative")
    rng = make_rng(rng)
    noise = rng.normal(0.0, stddev, size=path.walk.shape) if stddev > 0 else np.zeros(path.walk.shape)
    return MaskedHarrisPath(path, np.zeros((0, 2)), noise)


def read_mask(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return normalize_intervals(data)


def write_mask(intervals, path) -> None:
    rows = ["lo,hi"] + [f"{lo!r},{hi!r}" for lo, hi in normalize_intervals(intervals).tolist()]
    Path(path).write_text("\n".join(rows) + "\n")


def _observed_pieces(values: np.ndarray, observed: np.ndarray):
    # split every observed interval at integer breakpoints and interpolate the ends
    los, his = [], []
    for lo, hi in observed.tolist():
        cuts = np.arange(math.floor(lo) + 1, math.ceil(hi))
        pts = np.concatenate([[lo], cuts, [hi]])
        los.append(pts[:-1])
        his.append(pts[1:])
    a = np.concatenate(los)
    b = np.concatenate(his)
    grid = np.arange(values.size)
    return a, b, np.interp(a, grid, values), np.interp(b, grid, values)


def lambda_tilde(masked) -> float:
    """Least-squares scale fitted on the observed part of the path only."""
    if not isinstance(masked, MaskedHarrisPath):
        masked = _masked(HarrisPath(np.asarray(masked)), [])
    if masked.degenerate:
        raise DegenerateMask("the observation has no visible section")
    observed = masked.observed_intervals()
    if observed.shape[0] == 0:
        raise FullMask("no observed section left")
    values = masked.values
    n = masked.n
    a, b, ha, hb = _observed_pieces(values, observed)
    scale = 2.0 * n
    num = linear_pieces_against_mean(a / scale, b / scale, ha, hb)
    den = mean_squared_integral(observed[:, 0] / scale, observed[:, 1] / scale)
    return num / (2.0 * math.sqrt(n) * den)


def contaminate(lambda_sample, outliers) -> np.ndarray:
    return np.concatenate([np.asarray(lambda_sample, dtype=float), np.asarray(outliers, dtype=float)])
