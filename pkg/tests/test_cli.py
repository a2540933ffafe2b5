"""Command dispatch: exit codes, report formats, reproducibility."""

import json
import subprocess
import sys

import numpy as np
import pytest

from oshg.cli import dispatch, load_cli_config
from oshg.dataio import (
    CaptionRecord,
    load_captions_jsonl,
    parse_emb_file,
    write_captions_jsonl,
    write_emb_file,
)
from oshg.errors import ConfigError, DataError
from oshg.matrix import Rng


@pytest.fixture
def data_dir(tmp_path):
    """Tiny but trainable data directory: 8 images, 2 captions each."""
    root = tmp_path / "data"
    root.mkdir()
    rng = Rng(3)
    feats = rng.normal(8, 6)
    write_emb_file(root / "images.emb", feats)
    records = []
    for i in range(8):
        for j in range(2):
            records.append(CaptionRecord(
                caption_id=f"c{i}-{j}", image_id=f"img{i}",
                text=f"item {i} seen from angle {j}",
                synonyms=[f"thing {i} view {j}", f"object number {i}"]))
    write_captions_jsonl(root / "captions.jsonl", records)
    (root / "images.ids").write_text(
        "".join(f"img{i}\n" for i in range(8)))
    return root


class TestUsageErrors:
    def test_no_command_exits_1(self):
        assert dispatch([]) == 1

    def test_unknown_command_exits_1(self, capsys):
        assert dispatch(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_eval_without_data_exits_1(self, capsys):
        assert dispatch(["eval"]) == 1
        err = capsys.readouterr().err
        assert "usage" in err and "--data" in err

    def test_unknown_flag_exits_1(self):
        assert dispatch(["gradcheck", "--wibble", "3"]) == 1

    def test_bad_flag_value_exits_1(self):
        assert dispatch(["gradcheck", "--seed", "not-an-int"]) == 1

    def test_help_exits_0(self):
        assert dispatch(["--help"]) == 0

    def test_subcommand_help_exits_0(self):
        assert dispatch(["train", "--help"]) == 0

    def test_version_exits_0(self, capsys):
        assert dispatch(["--version"]) == 0
        assert "oshg" in capsys.readouterr().out


class TestConfigFile:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"epochs": 2, "bogus_key": 1}')
        assert dispatch(["train", "--config", str(cfg)]) == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_bad_json_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert dispatch(["train", "--config", str(cfg)]) == 2

    def test_non_object_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        with pytest.raises(DataError):
            load_cli_config(cfg)

    def test_unknown_keys_listed_sorted(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"zz": 1, "aa": 2}')
        with pytest.raises(ConfigError, match="aa, zz"):
            load_cli_config(cfg)

    def test_config_values_apply(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 3, "seed": 5,
                                   "out": str(tmp_path / "run")}))
        assert dispatch(["train", "--config", str(cfg), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["epochs"] == 3

    def test_flag_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 3, "seed": 5,
                                   "out": str(tmp_path / "run")}))
        assert dispatch(["train", "--config", str(cfg), "--epochs", "2",
                         "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["epochs"] == 2


class TestGradcheck:
    def test_seed7_passes(self, capsys):
        assert dispatch(["gradcheck", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert "PASSED" in out
        assert "theta_text" in out

    def test_json_report(self, capsys):
        assert dispatch(["gradcheck", "--seed", "7", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"] is True
        assert set(payload["block_errors"]) == {
            "theta_text", "theta_vision", "w_text", "w_vision"}

    def test_pooling_kernel(self, capsys):
        assert dispatch(["gradcheck", "--seed", "3",
                         "--kernel", "avg_pool", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["block_errors"]) == {"theta_vision", "w_vision"}

    def test_bad_h_exits_2(self):
        assert dispatch(["gradcheck", "--h", "0.5"]) == 2


class TestTrain:
    def test_builtin_corpus_writes_checkpoint(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert dispatch(["train", "--seed", "7", "--epochs", "2",
                         "--out", str(out)]) == 0
        assert (out / "manifest.json").exists()
        assert (out / "log.csv").exists()
        assert "trained 2 epochs" in capsys.readouterr().out

    def test_seed_reproducible_bytes(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert dispatch(["train", "--seed", "7", "--epochs", "3",
                             "--out", str(out)]) == 0
        names = sorted(p.name for p in out_a.iterdir())
        assert names == sorted(p.name for p in out_b.iterdir())
        for name in names:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        dispatch(["train", "--seed", "1", "--epochs", "2", "--out",
                  str(out_a)])
        dispatch(["train", "--seed", "2", "--epochs", "2", "--out",
                  str(out_b)])
        assert ((out_a / "theta_text.emb").read_bytes()
                != (out_b / "theta_text.emb").read_bytes())

    def test_json_payload(self, tmp_path, capsys):
        assert dispatch(["train", "--epochs", "2", "--out",
                         str(tmp_path / "run"), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert {"epochs", "loss", "rsum", "grad_dev", "alpha",
                "out"} <= set(payload)
        assert np.isfinite(payload["loss"])

    def test_data_dir(self, data_dir, tmp_path, capsys):
        assert dispatch(["train", "--data", str(data_dir), "--out",
                         str(tmp_path / "run"), "--epochs", "2",
                         "--batch", "8", "--l", "2", "--c", "8"]) == 0
        assert "trained 2 epochs" in capsys.readouterr().out

    def test_missing_data_dir_exits_2(self, tmp_path):
        assert dispatch(["train", "--data", str(tmp_path / "nope")]) == 2

    def test_bad_hyperparameter_exits_2(self, tmp_path):
        assert dispatch(["train", "--lr", "-1", "--out",
                         str(tmp_path / "run")]) == 2


class TestEval:
    def test_table_output(self, data_dir, capsys):
        assert dispatch(["eval", "--data", str(data_dir)]) == 0
        out = capsys.readouterr().out
        assert "RSUM" in out and "i2t" in out and "t2i" in out

    def test_json_output(self, data_dir, capsys):
        assert dispatch(["eval", "--data", str(data_dir), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert {"i2t", "t2i", "rsum"} <= set(payload)
        assert 0.0 <= payload["rsum"] <= 600.0

    def test_checkpoint_roundtrip(self, data_dir, tmp_path, capsys):
        run = tmp_path / "run"
        assert dispatch(["train", "--data", str(data_dir), "--out",
                         str(run), "--epochs", "2", "--batch", "8",
                         "--l", "2", "--c", "8"]) == 0
        capsys.readouterr()
        assert dispatch(["eval", "--data", str(data_dir),
                         "--checkpoint", str(run), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert np.isfinite(payload["rsum"])

    def test_ids_count_mismatch_exits_2(self, data_dir, capsys):
        (data_dir / "images.ids").write_text("only-one\n")
        assert dispatch(["eval", "--data", str(data_dir)]) == 2
        assert "ids" in capsys.readouterr().err

    def test_unknown_image_id_exits_2(self, data_dir):
        (data_dir / "images.ids").write_text(
            "".join(f"other{i}\n" for i in range(8)))
        assert dispatch(["eval", "--data", str(data_dir)]) == 2


class TestEntropy:
    def test_json_report_on_stdout(self, data_dir, capsys):
        assert dispatch(["entropy",
                         "--captions", str(data_dir / "captions.jsonl"),
                         "--images", str(data_dir / "images.emb")]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert {"text_bits", "augmented_text_bits", "image_bits",
                "alpha", "bins"} <= set(payload)
        assert payload["alpha"] is None

    def test_alpha_flag(self, data_dir, capsys):
        assert dispatch(["entropy",
                         "--captions", str(data_dir / "captions.jsonl"),
                         "--images", str(data_dir / "images.emb"),
                         "--alpha", "--ids",
                         str(data_dir / "images.ids")]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0 <= payload["alpha"] <= 1.0

    def test_alpha_without_ids_needs_row_indexed_images(self, data_dir):
        # image ids are img0..img7, not row indices, so pairing fails
        assert dispatch(["entropy",
                         "--captions", str(data_dir / "captions.jsonl"),
                         "--images", str(data_dir / "images.emb"),
                         "--alpha"]) == 2

    def test_missing_captions_exits_2(self, data_dir):
        assert dispatch(["entropy", "--captions",
                         str(data_dir / "nope.jsonl"),
                         "--images", str(data_dir / "images.emb")]) == 2


class TestEmbedAndBuildHg:
    def test_embed_roundtrip(self, data_dir, tmp_path, capsys):
        out = tmp_path / "caps.emb"
        assert dispatch(["embed", "--captions",
                         str(data_dir / "captions.jsonl"),
                         "--out", str(out), "--dim", "6"]) == 0
        assert parse_emb_file(out).shape == (16, 6)

    def test_embed_seed_reproducible(self, data_dir, tmp_path):
        outs = [tmp_path / "a.emb", tmp_path / "b.emb"]
        for out in outs:
            dispatch(["embed", "--captions",
                      str(data_dir / "captions.jsonl"),
                      "--out", str(out), "--dim", "6", "--seed", "4"])
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_build_hg(self, data_dir, tmp_path, capsys):
        emb = tmp_path / "caps.emb"
        dispatch(["embed", "--captions", str(data_dir / "captions.jsonl"),
                  "--out", str(emb), "--dim", "6"])
        capsys.readouterr()
        out = tmp_path / "hg.json"
        assert dispatch(["build-hg", "--features", str(emb),
                         "--out", str(out), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["vertices"] == 16
        assert payload["edges"] == 16
        assert payload["k"] == 6  # feature width, under the n-1 clamp
        assert out.exists()

    def test_build_hg_explicit_k(self, data_dir, tmp_path, capsys):
        emb = tmp_path / "caps.emb"
        dispatch(["embed", "--captions", str(data_dir / "captions.jsonl"),
                  "--out", str(emb), "--dim", "6"])
        capsys.readouterr()
        assert dispatch(["build-hg", "--features", str(emb),
                         "--out", str(tmp_path / "hg.json"),
                         "--k", "2", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["k"] == 2


class TestAugmentCommand:
    def test_offline_fills_synonyms(self, data_dir, tmp_path, capsys):
        plain = tmp_path / "plain.jsonl"
        records = load_captions_jsonl(data_dir / "captions.jsonl")
        stripped = [CaptionRecord(r.caption_id, r.image_id, r.text, [])
                    for r in records]
        write_captions_jsonl(plain, stripped)
        out = tmp_path / "aug.jsonl"
        assert dispatch(["augment", "--captions", str(plain),
                         "--source", str(data_dir / "captions.jsonl"),
                         "--out", str(out), "--l", "2"]) == 0
        assert "16 with synonyms" in capsys.readouterr().out
        loaded = load_captions_jsonl(out)
        assert all(len(r.synonyms) == 2 for r in loaded)
        assert [r.text for r in loaded] == [r.text for r in stripped]

    def test_missing_source_exits_2(self, data_dir, tmp_path, capsys):
        assert dispatch(["augment",
                         "--captions", str(data_dir / "captions.jsonl"),
                         "--out", str(tmp_path / "aug.jsonl")]) == 2
        assert "--source" in capsys.readouterr().err

    def test_http_unreachable_exits_3(self, data_dir, tmp_path):
        # a bound-then-closed port refuses connections
        import socket
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()
        assert dispatch(["augment",
                         "--captions", str(data_dir / "captions.jsonl"),
                         "--out", str(tmp_path / "aug.jsonl"),
                         "--mode", "http",
                         "--endpoint", f"http://127.0.0.1:{port}/v1",
                         "--retries", "0", "--timeout-ms", "200"]) == 3


class TestBenchCommand:
    def test_tiny_bench_json(self, capsys):
        assert dispatch(["bench", "--images", "12", "--regions", "2",
                         "--dim", "8", "--syn-dim", "4", "--caps", "2",
                         "--clusters", "3", "--l", "2", "--epochs", "2",
                         "--batch", "8", "--seeds", "0", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert {"rsum_on", "rsum_off", "rsum_gap", "dev_beta_alpha",
                "dev_beta_zero", "elapsed_s", "seeds"} <= set(payload)

    def test_tiny_bench_table(self, capsys):
        assert dispatch(["bench", "--images", "12", "--regions", "2",
                         "--dim", "8", "--syn-dim", "4", "--caps", "2",
                         "--clusters", "3", "--l", "2", "--epochs", "2",
                         "--batch", "8", "--seeds", "0"]) == 0
        assert "RSUM gap" in capsys.readouterr().out

    def test_bad_seed_list_exits_2(self):
        assert dispatch(["bench", "--seeds", ""]) == 2


class TestInstalledScript:
    def test_module_invocation_version(self):
        proc = subprocess.run(
            [sys.executable, "-m", "oshg.cli", "--version"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "oshg" in proc.stdout

    def test_module_invocation_usage_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "oshg.cli", "eval"],
            capture_output=True, text=True)
        assert proc.returncode == 1
        assert "usage" in proc.stderr
