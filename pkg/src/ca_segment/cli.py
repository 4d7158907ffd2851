"""Command-line interface.

Subcommands: ``segment`` (full pipeline), ``seeds`` (stop after seeding),
``stats`` (recompute segment statistics from a saved label raster).
Exit codes: 0 success, 1 usage error, 2 data or contract error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .automaton import NeighborhoodKind
from .errors import SegmenterError
from .pipeline import PipelineConfig, recompute_stats, run_seeds, run_segment

_NEIGHBORHOODS = {
    "moore": NeighborhoodKind.MOORE8,
    "vonneumann": NeighborhoodKind.VONNEUMANN4,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _band_triple(text):
    values = _int_list(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError("expected exactly three band indices r,g,b")
    return tuple(values)


def _add_intake_flags(parser):
    parser.add_argument("--input", required=True, help="input raster path")
    parser.add_argument(
        "--format",
        choices=["envi-bsq", "ppm"],
        default=None,
        help="input container (default: inferred from the extension)",
    )
    parser.add_argument(
        "--bands",
        type=_int_list,
        default=None,
        metavar="I,J,K",
        help="band subset to segment (default: all bands)",
    )
    parser.add_argument(
        "--neighborhood", choices=sorted(_NEIGHBORHOODS), default="moore"
    )
    parser.add_argument("--delta-rel", type=float, default=0.1,
                        help="relative spread below which a pixel counts as balanced")
    parser.add_argument("--smooth-window", type=int, default=5)
    parser.add_argument("--prominence", type=float, default=0.05,
                        help="peak height floor as a fraction of the histogram maximum")
    parser.add_argument("--min-separation", type=int, default=10)
    parser.add_argument("--half-width", type=int, default=5)
    parser.add_argument("--max-peaks", type=int, default=8)
    parser.add_argument("--stride", type=int, default=1)
    parser.add_argument("--epsilon", type=float, default=1e-6)
    parser.add_argument("--min-area", type=int, default=150,
                        help="study scale: segments below this area are regrown")
    parser.add_argument("--max-iters", type=int, default=None,
                        help="evolution cap (default: 10 * (width + height))")
    parser.add_argument("--max-rounds", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--strict", action="store_true",
                        help="exit nonzero if the automaton hits the iteration cap")
    parser.add_argument("--out-labels", required=True, help="output label raster path")
    parser.add_argument("--out-stats", required=True, help="output stats JSON path")


def _build_parser():
    parser = _Parser(prog="ca-segment", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    seg = sub.add_parser("segment", help="run the full segmentation pipeline")
    _add_intake_flags(seg)
    seg.add_argument("--out-preview", default=None, help="optional preview PPM path")
    seg.add_argument(
        "--preview-bands",
        type=_band_triple,
        default=None,
        metavar="R,G,B",
        help="bands rendered in the preview (default: 0,1,2)",
    )

    seeds = sub.add_parser("seeds", help="stop after seed generation")
    _add_intake_flags(seeds)

    stats = sub.add_parser("stats", help="recompute statistics from a label raster")
    stats.add_argument("--labels", required=True, help="saved label raster path")
    stats.add_argument(
        "--neighborhood", choices=sorted(_NEIGHBORHOODS), default="moore"
    )
    stats.add_argument("--out-stats", default=None,
                       help="write JSON here instead of stdout")
    return parser


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        input_path=args.input,
        format=args.format,
        bands=args.bands,
        neighborhood=_NEIGHBORHOODS[args.neighborhood],
        delta_rel=args.delta_rel,
        smooth_window=args.smooth_window,
        prominence_frac=args.prominence,
        min_separation=args.min_separation,
        half_width=args.half_width,
        max_peaks=args.max_peaks,
        stride=args.stride,
        epsilon=args.epsilon,
        min_area=args.min_area,
        max_iters=args.max_iters,
        max_rounds=args.max_rounds,
        threads=args.threads,
        out_labels=args.out_labels,
        out_stats=args.out_stats,
        out_preview=getattr(args, "out_preview", None),
        preview_bands=getattr(args, "preview_bands", None),
        strict=args.strict,
    )


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required (segment, seeds or stats)")

    try:
        if args.command == "segment":
            report = run_segment(_config_from_args(args))
            if not report.converged:
                print(
                    f"warning: automaton hit the iteration cap after "
                    f"{report.steps_to_convergence} steps without converging",
                    file=sys.stderr,
                )
                if args.strict:
                    return 2
            print(
                f"{report.seed_count} seeds ({report.seed_fraction:.1%}), "
                f"{report.label_count} labels, {report.steps_to_convergence} steps, "
                f"{report.segments_before} -> {report.segments_after} segments "
                f"in {report.rounds_used} elimination round(s)"
            )
        elif args.command == "seeds":
            report = run_seeds(_config_from_args(args))
            print(
                f"{report.seed_count} seeds ({report.seed_fraction:.1%}), "
                f"{report.label_count} labels over {len(report.ranges)} sum range(s)"
            )
        else:
            stats = recompute_stats(
                args.labels, connectivity=_NEIGHBORHOODS[args.neighborhood]
            )
            text = json.dumps(stats, sort_keys=True, indent=2) + "\n"
            if args.out_stats:
                with open(args.out_stats, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
    except SegmenterError as exc:
        print(f"ca-segment: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ca-segment: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
