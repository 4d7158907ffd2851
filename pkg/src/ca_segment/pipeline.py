"""End-to-end orchestration: configuration, the segment/seeds runs, reports.

The stats JSON is canonical (sorted keys, floats rounded at build time)
except for the ``timings`` block, which is the only part allowed to differ
between otherwise identical runs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import raster, seeding, segments as segmod
from .automaton import (
    AttenuationParams,
    NeighborhoodKind,
    init_from_seeds,
    neighbor_weights,
    run_to_convergence,
)
from .errors import ContractError
from .raster import LabelRaster, MultibandImage


@dataclass
class PipelineConfig:
    """Every knob of the pipeline; defaults follow the module contracts."""

    input_path: str
    format: str | None = None  # envi-bsq | ppm | None -> infer from extension
    bands: list[int] | None = None
    neighborhood: NeighborhoodKind = NeighborhoodKind.MOORE8
    delta_rel: float = 0.1
    smooth_window: int = 5
    prominence_frac: float = 0.05
    min_separation: int = 10
    half_width: int = 5
    max_peaks: int = 8
    stride: int = 1
    epsilon: float = 1e-6
    min_area: int = 150
    max_iters: int | None = None  # None -> 10 * (width + height)
    max_rounds: int = 5
    threads: int = 1
    out_labels: str | None = None
    out_stats: str | None = None
    out_preview: str | None = None
    preview_bands: tuple[int, int, int] | None = None
    strict: bool = False

    def validate(self):
        if self.min_area < 1:
            raise ContractError("min_area must be >= 1")
        if self.stride < 1:
            raise ContractError("stride must be >= 1")
        if self.threads < 1:
            raise ContractError("threads must be >= 1")
        if self.max_rounds < 1:
            raise ContractError("max_rounds must be >= 1")
        if self.max_iters is not None and self.max_iters < 1:
            raise ContractError("max_iters must be >= 1")


@dataclass
class RunReport:
    """Everything a run learned, minus the raw rasters."""

    mode: str
    width: int
    height: int
    bands: int
    depth: int
    seed_count: int
    seed_fraction: float
    label_count: int
    ranges: list[seeding.SumRange]
    label_summary: list[dict]
    steps_to_convergence: int | None = None
    converged: bool | None = None
    segments_before: int | None = None
    segments_after: int | None = None
    rounds_used: int | None = None
    cleared_per_round: list[int] | None = None
    segment_summary: list[dict] | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "width": self.width,
            "height": self.height,
            "bands": self.bands,
            "depth": self.depth,
            "seed_count": self.seed_count,
            "seed_fraction": round(self.seed_fraction, 6),
            "label_count": self.label_count,
            "ranges": [{"lo": r.lo, "hi": r.hi, "peak": r.peak} for r in self.ranges],
            "labels": self.label_summary,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }
        if self.mode == "segment":
            out.update(
                {
                    "steps_to_convergence": self.steps_to_convergence,
                    "converged": self.converged,
                    "segments_before": self.segments_before,
                    "segments_after": self.segments_after,
                    "rounds_used": self.rounds_used,
                    "cleared_per_round": self.cleared_per_round,
                    "segments": self.segment_summary,
                }
            )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


class _Phases:
    """Wall-time bookkeeping per pipeline phase."""

    def __init__(self):
        self.times = {}

    def measure(self, name):
        phases = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                phases.times[name] = phases.times.get(name, 0.0) + (
                    time.perf_counter() - self.start
                )

        return _Timer()


def _load_input(config: PipelineConfig) -> MultibandImage:
    image = raster.load_image(config.input_path, config.format)
    if config.bands is not None:
        subset = list(config.bands)
        if not subset:
            raise ContractError("band subset must not be empty")
        if any(b < 0 or b >= image.bands for b in subset):
            raise ContractError(
                f"band subset {subset} out of range for {image.bands} bands"
            )
        image = MultibandImage(
            data=np.ascontiguousarray(image.data[:, :, subset]), depth=image.depth
        )
    return image


def _make_seeds(image, config, phases):
    with phases.measure("histogram"):
        hist = seeding.compute_sum_histogram(image)
    with phases.measure("ranges"):
        ranges = seeding.select_ranges(
            hist,
            smooth_window=config.smooth_window,
            prominence_frac=config.prominence_frac,
            min_separation=config.min_separation,
            half_width=config.half_width,
            max_peaks=config.max_peaks,
        )
    with phases.measure("seeds"):
        seeds = seeding.generate_seeds(
            image, ranges, delta_rel=config.delta_rel, stride=config.stride
        )
    if len(seeds) == 0:
        raise ContractError(
            "no seeds produced: no subsampled pixel has a band sum inside the "
            f"selected ranges {[(r.lo, r.hi) for r in ranges]} "
            f"(smooth_window={config.smooth_window}, "
            f"prominence_frac={config.prominence_frac}, "
            f"min_separation={config.min_separation}, half_width={config.half_width}, "
            f"max_peaks={config.max_peaks}, stride={config.stride})"
        )
    return ranges, seeds


def _label_summary(seeds: seeding.SeedMap, final_labels=None) -> list[dict]:
    id_to_key = {v: k for k, v in seeds.label_table.items()}
    seed_counts = np.bincount(seeds.labels, minlength=seeds.label_count + 1)
    pixel_counts = None
    if final_labels is not None:
        pixel_counts = np.bincount(
            final_labels.ravel(), minlength=seeds.label_count + 1
        )
    rows = []
    for lab in range(1, seeds.label_count + 1):
        range_idx, region = id_to_key[lab]
        row = {
            "label": lab,
            "range_index": range_idx,
            "region": seeding.region_name(region),
            "seeds": int(seed_counts[lab]),
        }
        if pixel_counts is not None:
            row["pixels"] = int(pixel_counts[lab]) if lab < len(pixel_counts) else 0
        rows.append(row)
    return rows


def run_seeds(config: PipelineConfig) -> RunReport:
    """Histogram, range and seed construction only; writes the seed raster."""
    config.validate()
    phases = _Phases()
    with phases.measure("load"):
        image = _load_input(config)
    ranges, seeds = _make_seeds(image, config, phases)

    seed_labels = np.zeros(image.height * image.width, dtype=np.uint32)
    seed_labels[seeds.pixel_indices] = seeds.labels
    seed_raster = LabelRaster(labels=seed_labels.reshape(image.height, image.width))

    with phases.measure("write"):
        if config.out_labels:
            raster.save_label_raster(seed_raster, config.out_labels)

    report = RunReport(
        mode="seeds",
        width=image.width,
        height=image.height,
        bands=image.bands,
        depth=image.depth,
        seed_count=len(seeds),
        seed_fraction=len(seeds) / (image.width * image.height),
        label_count=seeds.label_count,
        ranges=ranges,
        label_summary=_label_summary(seeds),
        timings=phases.times,
    )
    if config.out_stats:
        with open(config.out_stats, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return report


def run_segment(config: PipelineConfig) -> RunReport:
    """The full pipeline: seed, converge, enforce the study scale, sign."""
    config.validate()
    phases = _Phases()
    with phases.measure("load"):
        image = _load_input(config)
    ranges, seeds = _make_seeds(image, config, phases)

    params = AttenuationParams.for_image(image, epsilon=config.epsilon)
    max_iters = config.max_iters
    if max_iters is None:
        max_iters = 10 * (image.width + image.height)

    with phases.measure("weights"):
        weights = neighbor_weights(image, config.neighborhood, params)
    with phases.measure("evolve"):
        grid = init_from_seeds(image.width, image.height, seeds)
        grid, steps, converged = run_to_convergence(
            grid,
            image,
            config.neighborhood,
            params,
            max_iters=max_iters,
            threads=config.threads,
            weights=weights,
        )

    with phases.measure("segments"):
        before = segmod.extract_segments(
            LabelRaster(labels=grid.labels), config.neighborhood
        )
        grid, rounds_used, cleared = segmod.eliminate_oversegmentation(
            grid,
            image,
            config.neighborhood,
            params,
            min_area=config.min_area,
            max_rounds=config.max_rounds,
            max_iters=max_iters,
            threads=config.threads,
            weights=weights,
        )
        final = segmod.extract_segments(
            LabelRaster(labels=grid.labels), config.neighborhood
        )

    with phases.measure("signatures"):
        seg_summary = []
        signatures = {}
        for seg in final.segments:
            seg.signature = segmod.medoid_signature(image, seg.pixels)
            signatures[seg.id] = seg.signature
            seg_summary.append(
                {
                    "id": seg.id,
                    "label": seg.label,
                    "area": seg.area,
                    "signature": [int(v) for v in seg.signature],
                }
            )

    label_raster = LabelRaster(labels=grid.labels.copy())
    with phases.measure("write"):
        if config.out_labels:
            raster.save_label_raster(label_raster, config.out_labels)
        if config.out_preview:
            triple = config.preview_bands
            if triple is None:
                triple = (0, 1, 2) if image.bands >= 3 else (0, 0, 0)
            raster.save_preview(
                image,
                LabelRaster(labels=final.seg_map.copy()),
                signatures,
                triple,
                config.out_preview,
            )

    report = RunReport(
        mode="segment",
        width=image.width,
        height=image.height,
        bands=image.bands,
        depth=image.depth,
        seed_count=len(seeds),
        seed_fraction=len(seeds) / (image.width * image.height),
        label_count=label_raster.label_count(),
        ranges=ranges,
        label_summary=_label_summary(seeds, final_labels=grid.labels),
        steps_to_convergence=steps,
        converged=converged,
        segments_before=len(before),
        segments_after=len(final),
        rounds_used=rounds_used,
        cleared_per_round=cleared,
        segment_summary=seg_summary,
        timings=phases.times,
    )
    if config.out_stats:
        with open(config.out_stats, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return report


def recompute_stats(labels_path, connectivity=NeighborhoodKind.MOORE8) -> dict:
    """Segment statistics of a previously saved label raster."""
    label_raster = raster.load_label_raster(labels_path)
    segs = segmod.extract_segments(label_raster, connectivity)
    return {
        "width": label_raster.width,
        "height": label_raster.height,
        "label_count": label_raster.label_count(),
        "labeled_pixels": int((label_raster.labels != 0).sum()),
        "segment_count": len(segs),
        "segments": [
            {"id": s.id, "label": s.label, "area": s.area} for s in segs.segments
        ],
    }
