import logging

import pytest

from svmrates.config import ConfigError, parse_config


@pytest.fixture
def minimal(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# rate run\nfamily = power_margin\nn_grid = 32, 64, 128\ntrials = 5\nseed = 11\n")
    return path


class TestParse:
    def test_defaults_filled(self, minimal):
        cfg = parse_config("rates", minimal)
        assert cfg["n_grid"] == (32, 64, 128)
        assert cfg["trials"] == 5 and cfg["seed"] == 11
        assert cfg["gamma"] == 1.0 and cfg.source["gamma"] == "default"
        assert "n_grid=32;64;128" in cfg.canonical()

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seed = 1\nsigmma = 2\n")
        with pytest.raises(ConfigError, match="sigmma"):
            parse_config("train", path)

    def test_missing_seed(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("family = separated\n")
        with pytest.raises(ConfigError, match="seed"):
            parse_config("gen", path)

    @pytest.mark.parametrize(
        "line",
        ["trials = many", "trials = 3", "n_grid = 64, 32, 128", "lambda = -1", "with_offset = maybe", "seed 3", "n_grid = 32,32"],
    )
    def test_malformed(self, tmp_path, line):
        path = tmp_path / "c.cfg"
        path.write_text(f"seed = 1\n{line}\n")
        with pytest.raises(ConfigError):
            parse_config("rates", path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config("rates", tmp_path / "absent.cfg")

    def test_flag_wins_and_is_logged(self, minimal, caplog):
        with caplog.at_level(logging.WARNING, logger="svmrates.config"):
            cfg = parse_config("rates", minimal, {"trials": "7"})
        assert cfg["trials"] == 7 and cfg.source["trials"] == "flag"
        assert "overrides" in caplog.text and "trials" in caplog.text

    def test_hash_ignores_output_settings(self, minimal, tmp_path):
        a = parse_config("rates", minimal, {"out": str(tmp_path / "a"), "jobs": "1"})
        b = parse_config("rates", minimal, {"out": str(tmp_path / "b"), "jobs": "3"})
        c = parse_config("rates", minimal, {"seed": "12"})
        assert a.config_hash == b.config_hash != c.config_hash

    def test_preset(self):
        cfg = parse_config("rates", flags={"seed": "1"}, preset="power_margin_gamma1")
        assert cfg["n_grid"] == (32, 64, 128, 256, 512, 1024, 2048) and cfg["trials"] == 20

    def test_output_directory_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("SVMRATES_OUT", str(tmp_path))
        assert parse_config("gen", flags={"seed": "1"}).out_dir() == tmp_path
        assert parse_config("gen", flags={"seed": "1", "out": "elsewhere"}).out_dir().name == "elsewhere"
