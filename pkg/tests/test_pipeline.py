from __future__ import annotations

import dataclasses
import json

import pytest

from idfuse.config import RunConfig, load_config
from idfuse.errors import ValidationError
from idfuse.pipeline import (
    annotate_run,
    cluster_run,
    enrichment_stage,
    evaluate_run,
    load_inputs,
    sweep_run,
    write_annotation_outputs,
)
from idfuse.synth import SyntheticSpec, generate_synthetic

SPEC = SyntheticSpec(
    n_identities=4,
    n_clothes_per_identity=2,
    dim=24,
    crops_per_track=6,
    tracks_per_identity=2,
    gallery_samples_per_identity=3,
    face_visibility_rate=0.9,
    seed=101,
)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return generate_synthetic(SPEC, out)


@pytest.fixture(scope="module")
def config(dataset):
    return load_config(dataset.config)


class TestAnnotate:
    def test_rows_cover_every_track_and_crop(self, config):
        result = annotate_run(config)
        n_tracks = SPEC.n_identities * SPEC.tracks_per_identity
        assert len(result.track_rows) == n_tracks
        assert len(result.crop_rows) == n_tracks * SPEC.crops_per_track
        names = [row["im_name"] for row in result.crop_rows]
        assert names == sorted(names)
        for row in result.track_rows:
            assert set(row) == {
                "vid_name", "track_id", "label", "score_vector",
                "n_images", "n_faces",
            }
            assert row["n_images"] == SPEC.crops_per_track

    def test_unknown_granularity(self, config):
        with pytest.raises(ValidationError, match="granularity"):
            annotate_run(config, granularity="video")

    def test_image_granularity_votes_per_crop(self, config):
        result = annotate_run(config, granularity="image")
        assert result.granularity == "image"
        # the voted track label is the argmax of some crop's fused scores
        for row in result.track_rows:
            best = max(row["score_vector"].values())
            winners = {k for k, v in row["score_vector"].items() if v == best}
            assert row["label"] in winners

    def test_output_files_deterministic(self, config, tmp_path):
        result_a = annotate_run(config)
        result_b = annotate_run(config)
        paths_a = write_annotation_outputs(result_a, tmp_path / "a", config)
        paths_b = write_annotation_outputs(result_b, tmp_path / "b", config)
        assert set(paths_a) == {
            "track_predictions", "crop_predictions", "decisions",
            "enriched_gallery", "run_config",
        }
        for name, path in paths_a.items():
            assert path.read_bytes() == paths_b[name].read_bytes(), name

    def test_run_config_snapshot_includes_granularity(self, config, tmp_path):
        result = annotate_run(config, granularity="image")
        paths = write_annotation_outputs(result, tmp_path, config)
        snapshot = json.loads(paths["run_config"].read_text())
        assert snapshot["granularity"] == "image"
        assert snapshot["alpha"] == config.alpha

    def test_decision_rows_parse_regularly(self, config, tmp_path):
        result = annotate_run(config)
        paths = write_annotation_outputs(result, tmp_path, config)
        keys = {
            "sample_id", "outcome", "label", "reason",
            "best_sim", "rank_gap", "det_conf",
        }
        with open(paths["decisions"], encoding="utf-8") as handle:
            for line in handle:
                row = json.loads(line)
                assert set(row) == keys

    def test_enriched_gallery_rows_sorted(self, config, tmp_path):
        result = annotate_run(config)
        paths = write_annotation_outputs(result, tmp_path, config)
        rows = [json.loads(line) for line in
                paths["enriched_gallery"].read_text().splitlines()]
        keys = [(r["label"], r["sample_id"]) for r in rows]
        assert keys == sorted(keys)
        assert {r["provenance"] for r in rows} <= {
            "original_labeled", "enriched_from_query"
        }


class TestBaselineEquivalence:
    def test_alpha_one_no_enrichment_equals_reid_only(self, config, dataset):
        # appearance-only run: no face inputs at all
        bare = RunConfig(
            gallery_manifest=dataset.gallery_manifest,
            query_manifest=dataset.query_manifest,
            reid_embeddings=dataset.reid_embeddings,
            alpha=1.0,
            eval_setting=config.eval_setting,
        )
        disabled = dataclasses.replace(config, alpha=1.0, enrichment_fraction=0.0)
        labels_bare = {
            (r["vid_name"], r["track_id"]): r["label"]
            for r in annotate_run(bare).track_rows
        }
        labels_off = {
            (r["vid_name"], r["track_id"]): r["label"]
            for r in annotate_run(disabled).track_rows
        }
        assert labels_bare == labels_off

    def test_no_face_inputs_yields_no_decisions(self, dataset):
        bare = RunConfig(
            gallery_manifest=dataset.gallery_manifest,
            query_manifest=dataset.query_manifest,
            reid_embeddings=dataset.reid_embeddings,
        )
        data = load_inputs(bare)
        g_face, g_enriched, decisions = enrichment_stage(bare, data)
        assert len(g_face) == 0
        assert decisions == []
        assert set(g_enriched.labels) == set(dataset.known_identities)


class TestEvaluate:
    def test_full_output_shape(self, config):
        output = evaluate_run(config, mode="full")
        assert set(output) == {"setting", "rank", "classify", "summary"}
        assert output["setting"]["clothes_mode"] == "general"
        rank = output["rank"]
        assert {"general", "same_clothes", "clothes_changing",
                "general_weighted"} == set(rank)
        for report in rank.values():
            assert set(report) == {
                "top1", "map", "per_image_acc", "per_track_acc",
                "n_queries_evaluated", "n_queries_excluded",
            }
        summary = output["summary"]
        assert summary["top1"] == rank["general"]["top1"]
        assert summary["per_track_acc"] == output["classify"]["per_track"]["accuracy"]

    def test_rank_only(self, config):
        output = evaluate_run(config, mode="rank")
        assert "classify" not in output
        assert output["summary"]["per_image_acc"] is None

    def test_classify_only(self, config):
        output = evaluate_run(config, mode="classify")
        assert "rank" not in output
        assert output["summary"]["top1"] == 0.0
        assert output["classify"]["decision_counts"]["labeled"] >= 0

    def test_unknown_mode(self, config):
        with pytest.raises(ValidationError, match="mode"):
            evaluate_run(config, mode="everything")

    def test_fusion_beats_raw_appearance_on_changed_clothes(self, config):
        output = evaluate_run(config, mode="full")
        # raw clothes-biased appearance ranks poorly; the fused engine
        # recovers identity through faces
        assert output["classify"]["per_track"]["accuracy"] == 1.0
        assert output["rank"]["clothes_changing"]["top1"] < 1.0


class TestSweepAndCluster:
    def test_sweep_run(self, config):
        report = sweep_run(config, [(0.5, 0.3), (0.8, 0.5)])
        assert report.n_pool > 0
        assert len(report.points) == 2
        best = report.best()
        assert best.accuracy is None or 0.0 <= best.accuracy <= 1.0

    def test_cluster_run_rows(self, config):
        rows = cluster_run(config, k=SPEC.n_identities)
        assert {row["cluster_id"] for row in rows} == set(range(SPEC.n_identities))
        for row in rows:
            assert set(row) == {"cluster_id", "sample_id", "distance"}
        by_cluster: dict[int, list[float]] = {}
        for row in rows:
            by_cluster.setdefault(row["cluster_id"], []).append(row["distance"])
        for distances in by_cluster.values():
            assert distances == sorted(distances)

    def test_cluster_requires_face_embeddings(self, dataset):
        bare = RunConfig(
            gallery_manifest=dataset.gallery_manifest,
            query_manifest=dataset.query_manifest,
            reid_embeddings=dataset.reid_embeddings,
        )
        with pytest.raises(Exception, match="face_embeddings"):
            cluster_run(bare, k=2)
