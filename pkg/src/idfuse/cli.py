"""Command-line surface: enrich, annotate, evaluate, sweep, cluster, synth, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import RunConfig, build_config, load_config_data
from .enrichment import build_face_gallery, decision_counts, enrich_gallery
from .errors import IdfuseError, ValidationError
from .io import (
    load_crop_manifest,
    load_embeddings,
    load_face_observations,
    write_jsonl,
)
from .pipeline import (
    annotate_run,
    cluster_run,
    decision_rows,
    evaluate_run,
    gallery_rows,
    load_inputs,
    sweep_run,
    write_annotation_outputs,
)
from .synth import SyntheticSpec, generate_synthetic
from .types import FACE, REID


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idfuse",
        description=(
            "Identity engine over precomputed embeddings: face-driven gallery "
            "enrichment, score fusion, and evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--gallery-manifest", type=Path)
        p.add_argument("--query-manifest", type=Path)
        p.add_argument("--reid-embeddings", type=Path)
        p.add_argument("--face-embeddings", type=Path)
        p.add_argument("--face-observations", type=Path)
        p.add_argument("--alpha", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--enrichment-fraction", type=float)
        p.add_argument("--preset", help="benchmark threshold preset name")
        p.add_argument("--det-enrich", type=float)
        p.add_argument("--det-inference", type=float)
        p.add_argument("--sim-min", type=float)
        p.add_argument("--rank-diff-min", type=float)
        p.add_argument("--unknown-sim-max", type=float)
        p.add_argument(
            "--open-set",
            action="store_true",
            default=None,
            help="enable the Unknown decision for low-similarity faces",
        )
        p.add_argument("--clothes-mode", choices=("general", "same_clothes", "clothes_changing"))
        p.add_argument("--set-mode", choices=("open", "closed"))
        p.add_argument("--min-track-len", type=int)

    p_enrich = sub.add_parser("enrich", help="build and write the enriched gallery")
    add_common(p_enrich)
    p_enrich.add_argument("--out-dir", type=Path, default=Path("enrich_out"))

    p_annotate = sub.add_parser("annotate", help="predict labels for all query tracks")
    add_common(p_annotate)
    p_annotate.add_argument("--out-dir", type=Path, default=Path("annotate_out"))
    p_annotate.add_argument("--granularity", choices=("track", "image"), default="track")

    p_eval = sub.add_parser("evaluate", help="compute metrics for the configured setting")
    add_common(p_eval)
    p_eval.add_argument("--mode", choices=("rank", "classify", "full"), default="full")
    p_eval.add_argument("--granularity", choices=("track", "image"), default="track")
    p_eval.add_argument("--out", type=Path, help="also write the report JSON here")

    p_sweep = sub.add_parser("sweep", help="grade detection/similarity threshold pairs")
    add_common(p_sweep)
    p_sweep.add_argument(
        "--grid",
        required=True,
        help="e.g. det=0.5:0.9:0.1,sim=0.3:0.8:0.05 (ranges inclusive)",
    )
    p_sweep.add_argument("--out", type=Path, default=Path("sweep_report.jsonl"))

    p_cluster = sub.add_parser("cluster", help="K-means over face vectors for offline labeling")
    add_common(p_cluster)
    p_cluster.add_argument("--k", type=int, required=True)
    p_cluster.add_argument("--out", type=Path, default=Path("cluster_report.jsonl"))

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p_synth.add_argument("--out-dir", type=Path, required=True)
    p_synth.add_argument("--n-identities", type=int, default=5)
    p_synth.add_argument("--n-unknown", type=int, default=0)
    p_synth.add_argument("--n-clothes", type=int, default=2)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--face-noise-sigma", type=float, default=0.05)
    p_synth.add_argument("--reid-clothes-weight", type=float, default=0.9)
    p_synth.add_argument("--face-visibility", type=float, default=0.8)
    p_synth.add_argument("--crops-per-track", type=int, default=12)
    p_synth.add_argument("--tracks-per-identity", type=int, default=2)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--gallery-samples", type=int, default=4)
    p_synth.add_argument("--noisy-face-rate", type=float, default=0.0)
    p_synth.add_argument("--reid-noise-sigma", type=float, default=0.05)
    p_synth.add_argument("--identity-separation", type=float, default=0.25)
    p_synth.add_argument("--same-clothes-tracks", type=int, default=0)

    p_validate = sub.add_parser("validate", help="parse every configured input file")
    add_common(p_validate)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    """Precedence: flags over config file over defaults."""
    data: dict = {}
    if args.config is not None:
        data = load_config_data(args.config)
        base_dir = args.config.parent
        for key in (
            "gallery_manifest",
            "query_manifest",
            "reid_embeddings",
            "face_embeddings",
            "face_observations",
        ):
            if data.get(key) is not None and not Path(data[key]).is_absolute():
                data[key] = str(base_dir / data[key])
    for key in (
        "gallery_manifest",
        "query_manifest",
        "reid_embeddings",
        "face_embeddings",
        "face_observations",
    ):
        value = getattr(args, key)
        if value is not None:
            data[key] = str(value.absolute())
    for key in ("alpha", "seed", "enrichment_fraction", "preset"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    thresholds = dict(data.get("thresholds") or {})
    for flag, key in (
        ("det_enrich", "det_enrich"),
        ("det_inference", "det_inference"),
        ("sim_min", "sim_min"),
        ("rank_diff_min", "rank_diff_min"),
        ("unknown_sim_max", "unknown_sim_max"),
        ("open_set", "open_set"),
    ):
        value = getattr(args, flag)
        if value is not None:
            thresholds[key] = value
    if thresholds:
        data["thresholds"] = thresholds
    eval_data = dict(data.get("eval") or {})
    for flag, key in (
        ("clothes_mode", "clothes_mode"),
        ("set_mode", "set_mode"),
        ("min_track_len", "min_track_len"),
    ):
        value = getattr(args, flag)
        if value is not None:
            eval_data[key] = value
    if eval_data:
        data["eval"] = eval_data
    return build_config(data)


def _parse_grid(spec: str) -> list[tuple[float, float]]:
    """`det=a:b:step,sim=a:b:step` to the det-major cross product."""
    axes: dict[str, list[float]] = {}
    for part in spec.split(","):
        if "=" not in part:
            raise ValidationError(f"bad grid component {part!r}, expected name=range")
        name, _, rng = part.partition("=")
        name = name.strip()
        if name not in ("det", "sim"):
            raise ValidationError(f"unknown grid axis {name!r}, expected det or sim")
        pieces = rng.split(":")
        try:
            if len(pieces) == 1:
                values = [float(pieces[0])]
            elif len(pieces) == 3:
                start, stop, step = (float(p) for p in pieces)
                if step <= 0:
                    raise ValidationError(f"grid step must be positive in {part!r}")
                values = []
                k = 0
                while start + k * step <= stop + 1e-9:
                    values.append(round(start + k * step, 10))
                    k += 1
            else:
                raise ValidationError(
                    f"bad grid range {rng!r}, expected value or start:stop:step"
                )
        except ValueError:
            raise ValidationError(f"bad grid numbers in {part!r}") from None
        axes[name] = values
    if "det" not in axes or "sim" not in axes:
        raise ValidationError("grid must define both det and sim axes")
    return [(d, s) for d in axes["det"] for s in axes["sim"]]


def _cmd_enrich(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    data = load_inputs(config)
    labeled = data.gallery_manifest.labeled_valid()
    g_face = build_face_gallery(labeled, data.face, data.face_obs, config.thresholds)
    g_enriched, decisions = enrich_gallery(
        labeled,
        data.query_manifest.valid(),
        data.reid,
        data.face,
        data.face_obs,
        config.thresholds,
        enrichment_fraction=config.enrichment_fraction,
        seed=config.seed,
        g_face=g_face,
    )
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(decision_rows(decisions), out_dir / "decisions.jsonl")
    write_jsonl(gallery_rows(g_enriched), out_dir / "enriched_gallery.jsonl")
    write_jsonl(gallery_rows(g_face), out_dir / "face_gallery.jsonl")
    (out_dir / "run_config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    counts = decision_counts(decisions)
    print(
        f"face gallery: {len(g_face)} entries / {g_face.n_identities()} identities"
    )
    print(
        f"enriched gallery: {len(g_enriched)} entries / "
        f"{g_enriched.n_identities()} identities"
    )
    print(
        "decisions: "
        + ", ".join(f"{k}={v}" for k, v in counts.items() if not k.startswith("skipped_"))
    )
    print(f"outputs written to {out_dir}")
    return 0


def _cmd_annotate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = annotate_run(config, granularity=args.granularity)
    paths = write_annotation_outputs(result, args.out_dir, config)
    print(f"{len(result.track_rows)} tracks, {len(result.crop_rows)} crops annotated")
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = evaluate_run(config, granularity=args.granularity, mode=args.mode)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    grid = _parse_grid(args.grid)
    report = sweep_run(config, grid)
    write_jsonl((p.to_dict() for p in report.points), args.out)
    best = report.best()
    accuracy = "n/a" if best.accuracy is None else f"{best.accuracy:.4f}"
    print(
        f"swept {len(report.points)} points over {report.n_pool} samples; "
        f"best det={best.det} sim={best.sim} accuracy={accuracy} "
        f"unique={best.unique_identities}"
    )
    print(f"report written to {args.out}")
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    rows = cluster_run(config, args.k)
    write_jsonl(rows, args.out)
    print(f"{len(rows)} vectors in {args.k} clusters; report written to {args.out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_identities=args.n_identities,
        n_unknown_identities=args.n_unknown,
        n_clothes_per_identity=args.n_clothes,
        dim=args.dim,
        face_noise_sigma=args.face_noise_sigma,
        reid_clothes_weight=args.reid_clothes_weight,
        face_visibility_rate=args.face_visibility,
        crops_per_track=args.crops_per_track,
        tracks_per_identity=args.tracks_per_identity,
        seed=args.seed,
        gallery_samples_per_identity=args.gallery_samples,
        noisy_face_rate=args.noisy_face_rate,
        reid_noise_sigma=args.reid_noise_sigma,
        identity_separation=args.identity_separation,
        same_clothes_tracks_per_identity=args.same_clothes_tracks,
    )
    dataset = generate_synthetic(spec, args.out_dir)
    print(f"synthetic dataset written to {dataset.out_dir}")
    print(f"known identities: {', '.join(dataset.known_identities)}")
    if dataset.unknown_identities:
        print(f"unknown identities: {', '.join(dataset.unknown_identities)}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    checked = 0
    if config.gallery_manifest is not None:
        manifest = load_crop_manifest(config.gallery_manifest)
        print(f"ok: gallery manifest ({len(manifest)} rows)")
        checked += 1
    if config.query_manifest is not None:
        manifest = load_crop_manifest(config.query_manifest)
        print(f"ok: query manifest ({len(manifest)} rows)")
        checked += 1
    if config.reid_embeddings is not None:
        emb = load_embeddings(config.reid_embeddings, REID)
        print(f"ok: reid embeddings ({len(emb)} records, dim {emb.dim})")
        checked += 1
    face = None
    if config.face_embeddings is not None:
        face = load_embeddings(config.face_embeddings, FACE)
        print(f"ok: face embeddings ({len(face)} records, dim {face.dim})")
        checked += 1
    if config.face_observations is not None:
        obs = load_face_observations(config.face_observations, face)
        print(f"ok: face observations ({len(obs)} samples)")
        checked += 1
    if checked == 0:
        raise ValidationError("no input files configured; nothing to validate")
    return 0


_COMMANDS = {
    "enrich": _cmd_enrich,
    "annotate": _cmd_annotate,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "cluster": _cmd_cluster,
    "synth": _cmd_synth,
    "validate": _cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IdfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
