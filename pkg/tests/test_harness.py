import json
import math

import numpy as np
import pytest

from mindec import cli, harness, mind
from mindec.coding import build_hamming74, build_pam4, build_repetition

FAST = """
scenario = {scenario}
snr_db_grid = {grid}
eval_samples = 1000
epochs = 2
samples_per_epoch = 2000
batch_size = 200
seed = 5
"""


def fast_cfg(scenario="middleton_repetition", grid="2", **kw):
    return harness.parse_config(FAST.format(scenario=scenario, grid=grid), **kw)


class TestConfig:
    def test_parse(self):
        cfg = harness.parse_config("""
            # comment
            scenario = nonuniform_4pam
            snr_db_grid = 0, 2.5, 5
            decoders = map, mind_supervised
            eval_samples = 5000
            hidden = 16, 16
            learning_rate = 0.002
        """)
        assert cfg.snr_db_grid == (0.0, 2.5, 5.0)
        assert cfg.decoders == ("map", "mind_supervised")
        assert cfg.train.hidden == (16, 16)
        assert cfg.train.learning_rate == 0.002

    def test_defaults_per_scenario(self):
        cfg = harness.parse_config("scenario = middleton_hamming")
        assert "genie_middleton" in cfg.decoders and cfg.impulse_ratio == 5.0 and cfg.impulse_prob == 0.05
        assert cfg.train.hidden == (64, 64, 64) and cfg.train.samples_per_epoch == 300_000

    def test_explicit_train_keys_override_scenario_defaults(self):
        cfg = harness.parse_config("scenario = middleton_repetition\nhidden = 8\nepochs = 3")
        assert cfg.train.hidden == (8,) and cfg.train.epochs == 3
        assert cfg.train.samples_per_epoch == 300_000
        assert harness.parse_config("scenario = nonuniform_4pam").train == mind.TrainConfig()

    @pytest.mark.parametrize("text", [
        "scenario = nope",
        "scenario = nonuniform_4pam\nsnr_db_grid = 4, 2",
        "scenario = nonuniform_4pam\neval_samples = 10",
        "scenario = nonuniform_4pam\ncolour = blue",
        "scenario = nonuniform_4pam\ndecoders = map, viterbi",
        "scenario = nonuniform_4pam\ndecoders = genie_middleton",
        "snr_db_grid = 1",
        "scenario = nonuniform_4pam\nepochs = many",
    ])
    def test_invalid(self, text):
        with pytest.raises(harness.ConfigError):
            harness.parse_config(text)


class TestBerFromBlocks:
    def test_identical(self):
        r = harness.ber_from_blocks([0, 3, 2], [0, 3, 2], build_pam4(0.5))
        assert (r.ser, r.ber) == (0.0, 0.0)

    def test_all_flipped(self):
        r = harness.ber_from_blocks([0, 1, 1, 0], [1, 0, 0, 1], build_repetition(5))
        assert (r.ser, r.ber) == (1.0, 1.0)

    def test_hamming_single_bit(self):
        cb = build_hamming74()
        true = np.zeros(100, dtype=int)
        dec = true.copy()
        dec[17] = 0b0100                 # label distance 1 from message 0000
        r = harness.ber_from_blocks(true, dec, cb)
        assert r.ser == pytest.approx(0.01)
        assert r.ber == pytest.approx(1 / 400)
        assert r.ser_stderr == pytest.approx(math.sqrt(0.01 * 0.99 / 100))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            harness.ber_from_blocks([0, 1], [0], build_repetition(5))


class TestRunScenario:
    def test_one_point_shape(self):
        cfg = fast_cfg()
        rows = harness.run_scenario(cfg)
        assert len(rows) == 1
        recs = harness.rows_to_records(cfg, rows)
        assert len(recs) == len(cfg.decoders)
        for rec in recs:
            assert set(rec) == set(harness.CSV_COLUMNS)
            assert all(v != "nan" for v in rec.values())

    def test_csv_roundtrip_and_determinism(self, tmp_path):
        cfg = fast_cfg("nonuniform_4pam", "0, 6")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        harness.save_results(cfg, harness.run_scenario(cfg), a)
        harness.save_results(cfg, harness.run_scenario(cfg), b)
        assert a.read_bytes() == b.read_bytes()
        recs = harness.load_results(a)
        assert [r["decoder"] for r in recs[:3]] == list(cfg.decoders)
        raw = harness.rows_to_records(cfg, harness.run_scenario(cfg))
        for rec, loaded in zip(raw, recs):
            assert float(rec["ser"]) == loaded["ser"] and float(rec["mi_per_use"]) == loaded["mi_per_use"]

    def test_parallel_matches_serial(self):
        cfg = fast_cfg("nonuniform_4pam", "0, 6")
        serial = harness.rows_to_records(cfg, harness.run_scenario(cfg))
        parallel = harness.rows_to_records(cfg, harness.run_scenario(cfg, jobs=2))
        assert serial == parallel

    def test_divergence_marks_row(self, monkeypatch):
        def boom(*a, **k):
            raise mind.TrainingDivergence("nan loss")
        monkeypatch.setattr(harness.mind, "fit_discriminator", boom)
        rows = harness.run_scenario(fast_cfg("nonuniform_4pam", "0"))
        assert rows[0].failed
        assert math.isnan(rows[0].results["mind_supervised"].ser)
        assert not math.isnan(rows[0].results["map"].ser)

    def test_high_snr_limit(self):
        cfg = harness.parse_config(FAST.format(scenario="nonuniform_4pam", grid="30"),
                                   eval_samples=5000)
        cfg = harness.ExperimentConfig(**{**cfg.__dict__, "train": mind.TrainConfig(seed=0)})
        row = harness.run_scenario(cfg)[0]
        for res in row.results.values():
            assert res.ser < 1e-3
        assert abs(row.rate.mi_bits_per_use - row.rate.hx_bits) < 0.05


class TestCheckpoints:
    def test_roundtrip_via_harness(self, tmp_path):
        cfg = fast_cfg("middleton_hamming")
        res = harness.train_point(cfg, 0)
        path = tmp_path / "disc.txt"
        harness.save_checkpoint(res.disc, path)
        loaded = harness.load_checkpoint(path, build_hamming74())
        y = np.random.default_rng(0).normal(size=(100, 7))
        np.testing.assert_array_equal(mind.decode(loaded, y), mind.decode(res.disc, y))
        np.testing.assert_array_equal(loaded.logits(y), res.disc.logits(y))

    def test_wrong_codebook(self, tmp_path):
        res = harness.train_point(fast_cfg("middleton_hamming"), 0)
        path = tmp_path / "disc.txt"
        harness.save_checkpoint(res.disc, path)
        with pytest.raises(mind.CheckpointError):
            harness.load_checkpoint(path, build_repetition(5))


class TestCli:
    def write_cfg(self, tmp_path, scenario="nonuniform_4pam", grid="0, 6"):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST.format(scenario=scenario, grid=grid))
        return path

    def test_sweep_twice_identical(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(a)]) == 0
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        out = capsys.readouterr()
        assert out.out == "" and "done" in out.err
        assert a.read_text().splitlines()[0] == ",".join(harness.CSV_COLUMNS)

    def test_train_then_estimate(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path)
        ckpt = tmp_path / "m.txt"
        assert cli.main(["train", "--config", str(cfg), "--snr-db", "8", "--out", str(ckpt)]) == 0
        capsys.readouterr()
        assert cli.main(["estimate", "--config", str(cfg), "--snr-db", "8",
                         "--checkpoint", str(ckpt)]) == 0
        header, values = capsys.readouterr().out.strip().splitlines()
        rec = dict(zip(header.split(","), map(float, values.split(","))))
        assert 0 <= rec["pe"] <= 0.75 and rec["n_samples"] == 1000
        assert rec["mi_bits_per_use"] <= rec["hx_bits"] + 1e-12

    def test_estimate_refuses_other_codebook(self, tmp_path, capsys):
        ckpt = tmp_path / "m.txt"
        assert cli.main(["train", "--config", str(self.write_cfg(tmp_path)), "--out", str(ckpt)]) == 0
        other = self.write_cfg(tmp_path, scenario="nonlinear_4pam")
        capsys.readouterr()
        assert cli.main(["estimate", "--config", str(other), "--checkpoint", str(ckpt)]) != 0
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "CheckpointError"

    def test_dump_codebook(self, capsys):
        assert cli.main(["dump-codebook", "--scenario", "middleton_conv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2 + 128

    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("scenario = nowhere\n")
        assert cli.main(["sweep", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 1
        assert json.loads(capsys.readouterr().err.strip())["error"] == "ConfigError"
