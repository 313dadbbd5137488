"""Command-line entry point: `ingest <video> --out <csv> [--detector <name>]`."""

from __future__ import annotations

import sys

import click

from .core import DETECTORS, CoverageError, IngestError, IngestSpec, ingest


@click.command()
@click.argument("video", type=str)
@click.option("--out", "out_csv", type=str, required=True,
              help="Output trace CSV path.")
@click.option("--detector", type=click.Choice(sorted(DETECTORS)),
              default="skinblob", help="Face-region detector.")
@click.option("--min-skin-pixels", type=int, default=50,
              help="Frames with fewer skin pixels become gap rows.")
@click.option("--max-gap-fraction", type=float, default=0.2,
              help="Fail when more than this fraction of frames are gaps.")
def main(video, out_csv, detector, min_skin_pixels, max_gap_fraction):
    """Convert a face video into a per-frame skin-RGB trace CSV."""
    spec = IngestSpec(detector=detector, min_skin_pixels=min_skin_pixels,
                      max_gap_fraction=max_gap_fraction)
    try:
        summary = ingest(video, out_csv, spec)
    except CoverageError as exc:
        click.echo(f"error: kind=CoverageError msg={exc}", err=True)
        click.echo(exc.report.text(), err=True, nl=False)
        sys.exit(1)
    except IngestError as exc:
        click.echo(f"error: kind={type(exc).__name__} msg={exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {summary.n_frames} rows "
               f"({summary.n_gap_frames} gaps, coverage {summary.coverage:.2%}, "
               f"relax {summary.relax_level}) -> {out_csv}")


if __name__ == "__main__":
    main()
