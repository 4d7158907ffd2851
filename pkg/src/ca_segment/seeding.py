"""Unsupervised construction of the automaton's initial state.

Seeds are chosen by brightness and spectral shape: the histogram of
per-pixel band sums is scanned for representative sum ranges around its
local maxima, pixels falling in a range are classified as spectrally
balanced or dominated by one band, and every occupied (range, region)
combination becomes one label. Every rule here is deterministic; ties
always resolve toward the lowest index or sum value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .raster import MultibandImage

#: Spectral-region code for pixels whose bands carry similar digital levels.
#: Dominant regions are coded by the dominating band index (0-based), so an
#: N-band image has N + 1 possible regions.
BALANCED = -1


@dataclass(frozen=True)
class SumRange:
    """An inclusive band-sum interval grown around one histogram peak."""

    lo: int
    hi: int
    peak: int

    def __post_init__(self):
        if not (self.lo <= self.peak <= self.hi):
            raise ContractError(f"range peak {self.peak} outside [{self.lo}, {self.hi}]")

    def contains(self, value) -> bool:
        return self.lo <= value <= self.hi


@dataclass
class SeedMap:
    """Seed pixels with their labels, plus the (range, region) -> id table.

    ``pixel_indices`` are flat row-major positions in ascending order and
    ``labels`` is the parallel array of uint32 ids. Ids are consecutive from
    1 in order of first encounter during the row-major scan, and only the
    (range index, spectral region) combinations that actually occur get ids.
    """

    pixel_indices: np.ndarray
    labels: np.ndarray
    label_table: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.pixel_indices.size)

    @property
    def label_count(self) -> int:
        return len(self.label_table)

    def entries(self):
        """Iterate (pixel index, label id) pairs in scan order."""
        return zip(self.pixel_indices.tolist(), self.labels.tolist())


def region_name(region) -> str:
    return "balanced" if region == BALANCED else f"band{region}"


def compute_sum_histogram(image: MultibandImage) -> np.ndarray:
    """Count occurrences of each per-pixel band sum.

    The returned array spans the full representable domain
    [0, bands * (2**depth - 1)], so its length is fixed by the image
    geometry and the counts total width * height.
    """
    sums = image.data.astype(np.int64).sum(axis=2)
    domain = image.bands * image.max_level + 1
    return np.bincount(sums.ravel(), minlength=domain).astype(np.int64)


def _smooth(counts, window):
    # centered moving average; the window shrinks at the domain edges so the
    # denominator only counts bins that exist
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(counts, dtype=np.float64)))
    idx = np.arange(len(counts))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, len(counts) - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


def _plateau_peaks(smoothed):
    """Indices of local maxima, one per maximal run of equal values.

    A run qualifies when every existing outside neighbor is strictly
    smaller; a run covering the whole domain (flat signal) never does.
    The reported index is the run's middle bin (lower-middle for even
    runs), so a smoothed spike stays centered on its source bin.
    """
    peaks = []
    n = len(smoothed)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and smoothed[j + 1] == smoothed[i]:
            j += 1
        left_ok = i == 0 or smoothed[i - 1] < smoothed[i]
        right_ok = j == n - 1 or smoothed[j + 1] < smoothed[i]
        if left_ok and right_ok and not (i == 0 and j == n - 1):
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


def select_ranges(
    hist: np.ndarray,
    smooth_window: int = 5,
    prominence_frac: float = 0.05,
    min_separation: int = 10,
    half_width: int = 5,
    max_peaks: int = 8,
) -> list[SumRange]:
    """Pick representative band-sum ranges at local maxima of the histogram.

    The counts are smoothed with a centered moving average, plateau-aware
    local maxima at least ``prominence_frac`` of the global smoothed maximum
    are collected, peaks closer than ``min_separation`` bins to a taller
    accepted peak are dropped (ties keep the lower sum), at most
    ``max_peaks`` tallest survive, and each survivor grows to
    ``peak +- half_width`` clamped to the domain. Overlapping ranges merge,
    keeping the taller constituent's peak. If no peak qualifies the whole
    domain is returned as a single range.
    """
    counts = np.asarray(hist, dtype=np.int64)
    if counts.ndim != 1 or counts.size == 0:
        raise ContractError("histogram must be a non-empty 1-D array")
    if smooth_window < 1 or smooth_window % 2 == 0:
        raise ContractError("smooth_window must be a positive odd bin count")
    if not 0.0 < prominence_frac < 1.0:
        raise ContractError("prominence_frac must be in (0, 1)")
    if min_separation < 1 or half_width < 1 or max_peaks < 1:
        raise ContractError("min_separation, half_width and max_peaks must be positive")

    smoothed = _smooth(counts, smooth_window)
    floor = prominence_frac * smoothed.max()
    candidates = [p for p in _plateau_peaks(smoothed) if smoothed[p] >= floor]

    last = len(counts) - 1
    if not candidates:
        top = int(np.argmax(smoothed))
        return [SumRange(0, last, top)]

    candidates.sort(key=lambda p: (-smoothed[p], p))
    accepted = []
    for p in candidates:
        if all(abs(p - q) >= min_separation for q in accepted):
            accepted.append(p)
    accepted = accepted[:max_peaks]

    ranges = sorted(
        (max(0, p - half_width), min(last, p + half_width), p) for p in accepted
    )
    merged = [ranges[0]]
    for lo, hi, peak in ranges[1:]:
        mlo, mhi, mpeak = merged[-1]
        if lo <= mhi:
            if (smoothed[peak], -peak) > (smoothed[mpeak], -mpeak):
                mpeak = peak
            merged[-1] = (mlo, max(mhi, hi), mpeak)
        else:
            merged.append((lo, hi, peak))
    return [SumRange(lo, hi, peak) for lo, hi, peak in merged]


def classify_spectral_region(v, delta_rel: float = 0.1) -> int:
    """Classify a pixel vector as BALANCED or by its dominating band.

    Balanced means the spread max - min stays within ``delta_rel`` times the
    mean level; otherwise the lowest band index attaining the maximum wins.
    An all-zero vector is balanced.
    """
    arr = np.asarray(v)
    if arr.ndim != 1 or arr.size < 1:
        raise ContractError("spectral vector must be 1-D and non-empty")
    if delta_rel < 0:
        raise ContractError("delta_rel must be >= 0")
    levels = arr.astype(np.int64)
    spread = int(levels.max() - levels.min())
    mean = float(levels.sum()) / levels.size
    if spread <= delta_rel * mean:
        return BALANCED
    return int(levels.argmax())


def _validate_ranges(ranges):
    if not ranges:
        raise ContractError("at least one sum range is required")
    ordered = sorted(ranges, key=lambda r: r.lo)
    for a, b in zip(ordered, ordered[1:]):
        if b.lo <= a.hi:
            raise ContractError(f"ranges overlap: [{a.lo},{a.hi}] and [{b.lo},{b.hi}]")
    return ordered


def generate_seeds(
    image: MultibandImage,
    ranges,
    delta_rel: float = 0.1,
    stride: int = 1,
) -> SeedMap:
    """Place a seed on every in-range pixel of the subsampled lattice.

    Pixels are visited in row-major order, subsampled by ``stride`` along
    both axes. A pixel whose band sum falls in one of the (disjoint) ranges
    is labeled by its (range index, spectral region) pair; ids are assigned
    consecutively from 1 in first-encounter order.
    """
    if stride < 1:
        raise ContractError("stride must be >= 1")
    ordered = _validate_ranges(ranges)

    data = image.data[::stride, ::stride].astype(np.int64)
    sub_h, sub_w, n = data.shape
    sums = data.sum(axis=2)

    range_idx = np.full((sub_h, sub_w), -1, dtype=np.int64)
    for i, r in enumerate(ordered):
        inside = (sums >= r.lo) & (sums <= r.hi)
        range_idx[inside] = i

    spread = data.max(axis=2) - data.min(axis=2)
    mean = data.sum(axis=2) / n
    region = np.where(spread <= delta_rel * mean, BALANCED, data.argmax(axis=2))

    rows, cols = np.nonzero(range_idx >= 0)  # row-major scan order
    if rows.size == 0:
        return SeedMap(
            pixel_indices=np.empty(0, dtype=np.int64),
            labels=np.empty(0, dtype=np.uint32),
            label_table={},
        )

    pixel_indices = rows * stride * image.width + cols * stride
    keys = range_idx[rows, cols] * (n + 1) + (region[rows, cols] + 1)

    uniq, first = np.unique(keys, return_index=True)
    by_first = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[by_first] = np.arange(1, len(uniq) + 1)
    labels = rank[np.searchsorted(uniq, keys)].astype(np.uint32)

    label_table = {}
    for pos, key in enumerate(uniq[by_first], start=1):
        label_table[(int(key) // (n + 1), int(key) % (n + 1) - 1)] = pos
    return SeedMap(pixel_indices=pixel_indices, labels=labels, label_table=label_table)
