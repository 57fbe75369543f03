"""Command line entry point: idfuse-extract."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ExtractorConfig
from .errors import ExtractorError
from .extract import extract


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idfuse-extract",
        description=(
            "Turn a directory of person crops into the embedding and "
            "face-observation files the identity engine reads."
        ),
    )
    parser.add_argument("--crop-dir", type=Path, required=True, help="directory of crop images")
    parser.add_argument(
        "--manifest",
        type=Path,
        default=None,
        help="crop manifest CSV; its im_name column drives the run",
    )
    parser.add_argument("--reid-out", type=Path, required=True)
    parser.add_argument("--face-out", type=Path, required=True)
    parser.add_argument("--observations-out", type=Path, required=True)
    parser.add_argument("--reid-model", default="stripe-hist")
    parser.add_argument("--face-model", default="grid-face")
    parser.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        config = ExtractorConfig(
            crop_dir=args.crop_dir,
            manifest=args.manifest,
            reid_out=args.reid_out,
            face_out=args.face_out,
            observations_out=args.observations_out,
            reid_model=args.reid_model,
            face_model=args.face_model,
            batch_size=args.batch_size,
        )
        report = extract(config)
    except (ExtractorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"crops: {report.n_crops}")
    print(f"reid embeddings: {report.n_reid}")
    print(f"face observations: {report.n_observations}")
    print(f"face embeddings: {report.n_face_embeddings}")
    print(f"skipped unreadable: {len(report.skipped)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
