"""CLI contracts: exit codes, metrics JSON, determinism, file outputs."""

import json
import os

import numpy as np
import pytest

from mtspool.cli import build_parser, main
from mtspool.config import RunConfig, apply_overrides, load_run_config
from mtspool.errors import ConfigurationError


def run(args):
    return main(args)


@pytest.fixture
def synth_args(tmp_path):
    out = tmp_path / "run"
    return [
        "train",
        "--synthetic",
        "--classes", "2",
        "--variables", "2",
        "--length", "16",
        "--per-class", "3",
        "--epochs", "3",
        "--lr", "1e-3",
        "--seed", "5",
        "--out", str(out),
    ], out


class TestRunConfigFile:
    def test_ini_sections(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(
            """
[data]
synthetic = true          # generated data
synth_classes = 2
normalize = false

[model]
metric = dtw
kernel_sizes = 3 5
heads = 4

[train]
epochs = 7
lr = 0.001
batch = auto

[output]
out_dir = somewhere
"""
        )
        cfg = load_run_config(cfg_path)
        assert cfg.synthetic is True
        assert cfg.metric == "dtw"
        assert cfg.kernel_sizes == (3, 5)
        assert cfg.heads == 4
        assert cfg.epochs == 7
        assert cfg.batch is None
        assert cfg.out_dir == "somewhere"

    def test_json_config(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"synthetic": True, "epochs": 9, "gnn_dims": [32]}))
        cfg = load_run_config(cfg_path)
        assert cfg.epochs == 9
        assert cfg.gnn_dims == (32,)

    def test_unknown_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("[train]\nmomentum = 0.9\n")
        with pytest.raises(ConfigurationError, match="unknown key 'momentum'"):
            load_run_config(cfg_path)

    def test_unknown_section_rejected(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("[experimental]\nx = 1\n")
        with pytest.raises(ConfigurationError, match="unknown config section"):
            load_run_config(cfg_path)

    def test_flags_override_file(self, tmp_path):
        cfg = RunConfig(epochs=100)
        out = apply_overrides(cfg, {"epochs": 5, "lr": None})
        assert out.epochs == 5
        assert out.lr == RunConfig().lr

    def test_bad_value_types(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("[train]\nepochs = soon\n")
        with pytest.raises(ConfigurationError, match="integer"):
            load_run_config(cfg_path)


class TestTrainCommand:
    def test_writes_metrics_and_checkpoint(self, synth_args, capsys):
        args, out = synth_args
        assert run(args) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["schema"] == "mtspool-metrics-v1"
        assert metrics["seed"] == 5
        assert 0.0 <= metrics["train_accuracy"] <= 1.0
        assert (out / "model.ckpt").exists()
        printed = json.loads(capsys.readouterr().out.strip())
        assert "train_accuracy" in printed

    def test_deterministic_modulo_wall_seconds(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"run{i}"
            args = [
                "train", "--synthetic", "--classes", "2", "--variables", "2",
                "--length", "16", "--per-class", "3", "--epochs", "3",
                "--lr", "1e-3", "--seed", "9", "--out", str(out),
            ]
            assert run(args) == 0
            payload = json.loads((out / "metrics.json").read_text())
            payload.pop("wall_seconds")
            payload["config"].pop("out_dir")
            outs.append(payload)
        assert outs[0] == outs[1]

    def test_missing_dataset_path_is_exit_2(self, tmp_path, capsys):
        code = run(
            ["train", "--data-dir", str(tmp_path / "absent"), "--dataset", "X",
             "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "absent" in capsys.readouterr().err

    def test_config_error_is_exit_1(self, tmp_path, capsys):
        # neither synthetic nor a dataset dir
        code = run(["train", "--out", str(tmp_path / "o")])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_validation_split_saves_best_checkpoint(self, tmp_path):
        out = tmp_path / "run"
        args = [
            "train", "--synthetic", "--classes", "2", "--variables", "2",
            "--length", "16", "--per-class", "6", "--epochs", "3",
            "--lr", "1e-3", "--seed", "1", "--val-fraction", "0.25",
            "--out", str(out),
        ]
        assert run(args) == 0
        assert (out / "best.ckpt").exists()
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["best_val_accuracy"] is not None


class TestEvalCommand:
    def test_eval_prints_metrics(self, synth_args, capsys):
        args, out = synth_args
        assert run(args) == 0
        capsys.readouterr()
        code = run(
            ["eval", str(out / "model.ckpt"), "--synthetic", "--classes", "2",
             "--variables", "2", "--length", "16", "--per-class", "3",
             "--seed", "5"]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"accuracy", "mean_loss", "per_class"}
        assert len(payload["per_class"]) == 2

    def test_shape_mismatch_is_exit_2(self, synth_args, capsys):
        args, out = synth_args
        assert run(args) == 0
        capsys.readouterr()
        code = run(
            ["eval", str(out / "model.ckpt"), "--synthetic", "--classes", "2",
             "--variables", "3", "--length", "16", "--per-class", "3",
             "--seed", "5"]
        )
        assert code == 2
        assert "does not match checkpoint" in capsys.readouterr().err

    def test_missing_checkpoint_is_exit_2(self, tmp_path, capsys):
        code = run(
            ["eval", str(tmp_path / "nope.ckpt"), "--synthetic", "--classes", "2",
             "--variables", "2", "--length", "16", "--per-class", "3"]
        )
        assert code == 2


class TestExportCommands:
    def test_embed_writes_csv(self, synth_args, tmp_path, capsys):
        args, out = synth_args
        assert run(args) == 0
        emb = tmp_path / "e.csv"
        code = run(
            ["embed", str(out / "model.ckpt"), "--out-file", str(emb),
             "--synthetic", "--classes", "2", "--variables", "2",
             "--length", "16", "--per-class", "3", "--seed", "5"]
        )
        assert code == 0
        assert emb.exists()
        assert (tmp_path / "e_pca2.csv").exists()

    def test_inspect_graph_outputs(self, synth_args, tmp_path, capsys):
        args, out = synth_args
        assert run(args) == 0
        gdir = tmp_path / "g"
        code = run(
            ["inspect-graph", str(out / "model.ckpt"), "--out-dir", str(gdir),
             "--index", "1", "--synthetic", "--classes", "2", "--variables", "2",
             "--length", "16", "--per-class", "3", "--seed", "5"]
        )
        assert code == 0
        assert (gdir / "adjacency.csv").exists()
        assert (gdir / "unused_clusters.json").exists()

    def test_gen_synth_round_trips(self, tmp_path, capsys):
        out = tmp_path / "data"
        code = run(
            ["gen-synth", "--name", "toy", "--classes", "2", "--variables", "2",
             "--length", "8", "--per-class", "2", "--seed", "3", "--out", str(out)]
        )
        assert code == 0
        assert (out / "toy_TRAIN.ts").exists()
        assert (out / "toy_TEST.ts").exists()
        # and a model can train from the generated files
        capsys.readouterr()
        run_out = tmp_path / "r"
        code = run(
            ["train", "--data-dir", str(out), "--dataset", "toy", "--epochs", "2",
             "--lr", "1e-3", "--seed", "3", "--out", str(run_out)]
        )
        assert code == 0


class TestParserHygiene:
    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["train", "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in ("--config", "--seed", "--pooling", "--metric", "--epochs"):
            assert flag in text
        assert "default" in text

    def test_unknown_flag_fails_fast(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["train", "--warp-speed"])
        assert exc.value.code == 2

    def test_every_command_has_help(self, capsys):
        for command in ("train", "eval", "embed", "inspect-graph", "gen-synth"):
            with pytest.raises(SystemExit) as exc:
                argv = [command, "--help"]
                build_parser().parse_args(argv)
            assert exc.value.code == 0
            assert "--config" in capsys.readouterr().out
