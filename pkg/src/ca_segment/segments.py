"""Post-convergence analysis of the label grid.

Segments are maximal connected components of equal nonzero label. The
scale filter nulls every segment smaller than the study scale and lets the
automaton recolonize the freed cells, repeating until the grid carries no
undersized segment. Each surviving segment is summarized by the member
pixel vector with the least total Euclidean distance to the rest of the
segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .automaton import AutomatonGrid, AttenuationParams, NeighborhoodKind, run_to_convergence
from .errors import ContractError
from .raster import LabelRaster, MultibandImage


@dataclass
class Segment:
    """One connected same-label region; pixels are ascending flat indices."""

    id: int
    label: int
    pixels: np.ndarray
    area: int
    signature: np.ndarray | None = None


@dataclass
class SegmentSet:
    """Segments plus the (height, width) map from pixel to segment id (0 = none)."""

    segments: list[Segment] = field(default_factory=list)
    seg_map: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.segments)

    def areas(self) -> np.ndarray:
        return np.array([s.area for s in self.segments], dtype=np.int64)


def _structure(connectivity: NeighborhoodKind):
    if connectivity is NeighborhoodKind.MOORE8:
        return np.ones((3, 3), dtype=bool)
    return ndimage.generate_binary_structure(2, 1)


def extract_segments(labels: LabelRaster, connectivity: NeighborhoodKind) -> SegmentSet:
    """Decompose the raster into connected components of equal nonzero label.

    Segment ids are assigned from 1 in row-major order of each component's
    first pixel, so extraction is deterministic.
    """
    lab = labels.labels
    structure = _structure(connectivity)
    comp = np.zeros(lab.shape, dtype=np.int64)
    offset = 0
    for value in np.unique(lab):
        if value == 0:
            continue
        mask = lab == value
        labeled, count = ndimage.label(mask, structure=structure)
        comp[mask] = labeled[mask] + offset
        offset += count

    flat = comp.ravel()
    nz = np.nonzero(flat)[0]
    if nz.size == 0:
        return SegmentSet(segments=[], seg_map=np.zeros(lab.shape, dtype=np.uint32))

    vals = flat[nz]
    uniq, first, inverse = np.unique(vals, return_index=True, return_inverse=True)
    by_first = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[by_first] = np.arange(1, len(uniq) + 1)
    seg_ids = rank[inverse]

    seg_map = np.zeros(flat.shape, dtype=np.uint32)
    seg_map[nz] = seg_ids.astype(np.uint32)
    seg_map = seg_map.reshape(lab.shape)

    order = np.argsort(seg_ids, kind="stable")
    counts = np.bincount(seg_ids, minlength=len(uniq) + 1)[1:]
    bounds = np.concatenate(([0], np.cumsum(counts)))
    flat_labels = lab.ravel()
    segments = []
    for sid in range(1, len(uniq) + 1):
        pixels = nz[order[bounds[sid - 1] : bounds[sid]]]
        segments.append(
            Segment(
                id=sid,
                label=int(flat_labels[pixels[0]]),
                pixels=pixels,
                area=int(pixels.size),
            )
        )
    return SegmentSet(segments=segments, seg_map=seg_map)


def null_small_segments(grid: AutomatonGrid, segs: SegmentSet, min_area: int):
    """Null every segment below ``min_area``; returns (grid, cleared segment count)."""
    if min_area < 1:
        raise ContractError("min_area must be >= 1")
    if segs.seg_map is not None and segs.seg_map.shape != grid.labels.shape:
        raise ContractError("segment set does not match the grid dimensions")
    labels = grid.labels.copy()
    theta = grid.theta.copy()
    flat_labels = labels.ravel()
    flat_theta = theta.ravel()
    cleared = 0
    for seg in segs.segments:
        if seg.area < min_area:
            flat_labels[seg.pixels] = 0
            flat_theta[seg.pixels] = 0.0
            cleared += 1
    return AutomatonGrid(labels=labels, theta=theta, step=grid.step), cleared


def eliminate_oversegmentation(
    grid: AutomatonGrid,
    image: MultibandImage,
    nb: NeighborhoodKind,
    params: AttenuationParams,
    min_area: int,
    max_rounds: int = 5,
    max_iters: int | None = None,
    threads: int = 1,
    connectivity: NeighborhoodKind | None = None,
    weights=None,
):
    """Repeat {extract, null undersized, reconverge} until the scale holds.

    Requires at least one segment at or above ``min_area`` to regrow from.
    Returns (grid, rounds_used, cleared_per_round); a round only counts when
    it cleared something, so a clean grid reports 0 rounds.
    """
    if max_rounds < 1:
        raise ContractError("max_rounds must be >= 1")
    if connectivity is None:
        connectivity = nb
    if max_iters is None:
        max_iters = 10 * (grid.width + grid.height)

    rounds_used = 0
    cleared_per_round = []
    for _ in range(max_rounds):
        segs = extract_segments(LabelRaster(labels=grid.labels), connectivity)
        if not segs.segments:
            raise ContractError("grid carries no labeled segments; nothing to grow from")
        small = [s for s in segs.segments if s.area < min_area]
        if not small:
            break
        if len(small) == len(segs.segments):
            raise ContractError(
                f"every segment is below min_area={min_area}; nothing to grow from "
                "(lower min_area or loosen the seeding parameters)"
            )
        grid, cleared = null_small_segments(grid, segs, min_area)
        grid, _, _ = run_to_convergence(
            grid, image, nb, params, max_iters=max_iters, threads=threads, weights=weights
        )
        rounds_used += 1
        cleared_per_round.append(cleared)
    return grid, rounds_used, cleared_per_round


def medoid_signature(image: MultibandImage, pixels, sample_cap: int = 4096) -> np.ndarray:
    """Member vector minimizing the summed Euclidean distance to the segment.

    Ties break toward the lowest pixel index. Segments larger than
    ``sample_cap`` are reduced to a deterministic evenly strided subsample
    of exactly ``sample_cap`` members before the quadratic scan.
    """
    idx = np.asarray(pixels, dtype=np.int64)
    if idx.size == 0:
        raise ContractError("medoid of an empty pixel list")
    if sample_cap < 1:
        raise ContractError("sample_cap must be >= 1")
    idx = np.sort(idx)
    if idx.size > sample_cap:
        take = (np.arange(sample_cap, dtype=np.int64) * idx.size) // sample_cap
        idx = idx[take]

    flat = image.data.reshape(-1, image.bands)
    vectors = flat[idx].astype(np.float64)
    m = vectors.shape[0]
    sums = np.zeros(m, dtype=np.float64)
    chunk = max(1, min(m, 8 * 1024 * 1024 // (8 * max(1, m))))
    for start in range(0, m, chunk):
        block = vectors[start : start + chunk]
        diff = block[:, None, :] - vectors[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        sums[start : start + chunk] = dist.sum(axis=1)
    best = int(np.argmin(sums))  # first minimum = lowest pixel index
    return flat[idx[best]].copy()
