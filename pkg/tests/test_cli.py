from __future__ import annotations

import json

import pytest

from idfuse.cli import _parse_grid, main
from idfuse.errors import ValidationError


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_synth")
    code = main([
        "synth", "--out-dir", str(out),
        "--n-identities", "3", "--dim", "16", "--crops-per-track", "4",
        "--gallery-samples", "3", "--face-visibility", "0.9", "--seed", "7",
    ])
    assert code == 0
    return out


class TestGridParsing:
    def test_cross_product_det_major(self):
        grid = _parse_grid("det=0.5:0.7:0.1,sim=0.4:0.5:0.1")
        assert grid == [
            (0.5, 0.4), (0.5, 0.5),
            (0.6, 0.4), (0.6, 0.5),
            (0.7, 0.4), (0.7, 0.5),
        ]

    def test_single_values(self):
        assert _parse_grid("det=0.8,sim=0.4") == [(0.8, 0.4)]

    def test_inclusive_endpoint_with_float_steps(self):
        grid = _parse_grid("det=0.1:0.3:0.1,sim=0.0")
        assert [d for d, _ in grid] == [0.1, 0.2, 0.3]

    @pytest.mark.parametrize(
        "spec",
        [
            "det=0.5",  # missing sim axis
            "depth=0.5,sim=0.4",  # unknown axis
            "det=0.5:0.6,sim=0.4",  # two-piece range
            "det=0.5:0.6:-0.1,sim=0.4",  # negative step
            "det=abc,sim=0.4",  # not numbers
            "0.5,sim=0.4",  # missing name
        ],
    )
    def test_rejects_bad_specs(self, spec):
        with pytest.raises(ValidationError):
            _parse_grid(spec)


class TestCliFlow:
    def test_validate(self, dataset_dir, capsys):
        code = main(["validate", "--config", str(dataset_dir / "config.json")])
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("ok:") == 5

    def test_validate_nothing_configured(self, capsys):
        code = main(["validate"])
        assert code == 1
        assert "nothing to validate" in capsys.readouterr().err

    def test_enrich(self, dataset_dir, tmp_path, capsys):
        code = main([
            "enrich", "--config", str(dataset_dir / "config.json"),
            "--out-dir", str(tmp_path / "enrich"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "face gallery:" in out and "enriched gallery:" in out
        for name in ("decisions.jsonl", "enriched_gallery.jsonl",
                     "face_gallery.jsonl", "run_config.json"):
            assert (tmp_path / "enrich" / name).exists()

    def test_annotate_and_evaluate(self, dataset_dir, tmp_path, capsys):
        out_dir = tmp_path / "annotate"
        code = main([
            "annotate", "--config", str(dataset_dir / "config.json"),
            "--out-dir", str(out_dir),
        ])
        assert code == 0
        assert (out_dir / "track_predictions.jsonl").exists()

        report_path = tmp_path / "report.json"
        code = main([
            "evaluate", "--config", str(dataset_dir / "config.json"),
            "--mode", "full", "--out", str(report_path),
        ])
        assert code == 0
        printed = capsys.readouterr().out
        report = json.loads(report_path.read_text())
        assert report["summary"]["per_track_acc"] is not None
        assert json.loads(printed[printed.index("{"):]) == report

    def test_sweep(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "sweep.jsonl"
        code = main([
            "sweep", "--config", str(dataset_dir / "config.json"),
            "--grid", "det=0.5:0.9:0.2,sim=0.3:0.7:0.2",
            "--det-enrich", "0.5",
            "--out", str(out),
        ])
        assert code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 9
        assert "best det=" in capsys.readouterr().out

    def test_cluster(self, dataset_dir, tmp_path):
        out = tmp_path / "clusters.jsonl"
        code = main([
            "cluster", "--config", str(dataset_dir / "config.json"),
            "--k", "3", "--out", str(out),
        ])
        assert code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert {r["cluster_id"] for r in rows} == {0, 1, 2}

    def test_flags_override_config(self, dataset_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main([
            "annotate", "--config", str(dataset_dir / "config.json"),
            "--out-dir", str(out_a),
        ]) == 0
        assert main([
            "annotate", "--config", str(dataset_dir / "config.json"),
            "--out-dir", str(out_b), "--alpha", "0.1",
        ]) == 0
        snap_a = json.loads((out_a / "run_config.json").read_text())
        snap_b = json.loads((out_b / "run_config.json").read_text())
        assert snap_a["alpha"] == 0.75
        assert snap_b["alpha"] == 0.1

    def test_missing_input_is_error_not_crash(self, tmp_path, capsys):
        code = main([
            "annotate",
            "--gallery-manifest", str(tmp_path / "absent.csv"),
            "--query-manifest", str(tmp_path / "absent.csv"),
            "--reid-embeddings", str(tmp_path / "absent.jsonl"),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["transmogrify"])
        assert excinfo.value.code == 2

    def test_bad_flag_value_exits_two(self, dataset_dir):
        with pytest.raises(SystemExit) as excinfo:
            main([
                "evaluate", "--config", str(dataset_dir / "config.json"),
                "--mode", "sideways",
            ])
        assert excinfo.value.code == 2

    def test_preset_flag(self, dataset_dir, tmp_path):
        out = tmp_path / "preset_run"
        assert main([
            "annotate", "--config", str(dataset_dir / "config.json"),
            "--out-dir", str(out), "--preset", "ltcc",
        ]) == 0
        snapshot = json.loads((out / "run_config.json").read_text())
        assert snapshot["thresholds"]["sim_min"] == 0.5

    def test_unknown_preset_is_error(self, dataset_dir, capsys):
        code = main([
            "annotate", "--config", str(dataset_dir / "config.json"),
            "--preset", "bogus", "--out-dir", "unused",
        ])
        assert code == 1
        assert "unknown preset" in capsys.readouterr().err
