"""Experiment configuration: INI round-trip, validation diagnostics, grid
parsing, and overrides."""
import io

import pytest

from skewlab import ConfigError, ExperimentConfig, default_config
from skewlab.config import parse_f_terms, parse_grid


def test_default_sections():
    doc = default_config()
    assert set(doc) == {"system", "run", "output"}
    assert doc["run"]["seed"] == 1
    assert doc["system"]["a"] == 2


def test_file_roundtrip_preserves_case(tmp_path):
    cfg = ExperimentConfig()
    cfg.override("run", "homoclinic_K", 55)
    cfg.override("run", "samples", 777)
    p = str(tmp_path / "lab.ini")
    cfg.write(p)
    back = ExperimentConfig.from_file(p)
    assert back.run["homoclinic_K"] == 55  # configparser must not lowercase
    assert back.run["samples"] == 777
    assert back.to_dict() == cfg.to_dict()


def test_write_accepts_file_object():
    buf = io.StringIO()
    ExperimentConfig().write(buf)
    assert "[run]" in buf.getvalue()


def test_unknown_field_and_section_diagnostics(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\nno_such_knob = 3\n")
    with pytest.raises(ConfigError, match=r"\[run\].*no_such_knob"):
        ExperimentConfig.from_file(str(p))
    p.write_text("[weather]\nrain = yes\n")
    with pytest.raises(ConfigError, match="weather"):
        ExperimentConfig.from_file(str(p))


def test_type_coercion_diagnostics(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\nsamples = one hundred\n")
    with pytest.raises(ConfigError, match=r"\[run\].*samples"):
        ExperimentConfig.from_file(str(p))


def test_missing_file():
    with pytest.raises((ConfigError, OSError)):
        ExperimentConfig.from_file("/nonexistent/lab.ini")


def test_override_behaviour():
    cfg = ExperimentConfig()
    before = cfg.run["samples"]
    cfg.override("run", "samples", None)  # None is a no-op
    assert cfg.run["samples"] == before
    cfg.override("run", "samples", "123")  # coerced like file input
    assert cfg.run["samples"] == 123
    with pytest.raises(ConfigError):
        cfg.override("run", "definitely_not_a_field", 1)
    with pytest.raises(ConfigError):
        cfg.override("run", "samples", "many")


def test_from_dict_validates():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"run": {"samples": 10}, "extra": {}})
    cfg = ExperimentConfig.from_dict({"run": {"samples": 10}})
    assert cfg.run["samples"] == 10
    # untouched fields keep defaults
    assert cfg.run["seed"] == default_config()["run"]["seed"]


def test_parse_grid_forms():
    assert parse_grid("16,24,32") == [16, 24, 32]
    assert parse_grid("16; 24;32") == [16, 24, 32]
    assert parse_grid("0.5, 1.5", float) == [0.5, 1.5]
    with pytest.raises(ValueError):
        parse_grid("")
    with pytest.raises(ValueError):
        parse_grid("4,x,8")


def test_parse_f_terms():
    terms = parse_f_terms("1,0,0.0,1.0")
    assert terms == [((1, 0), 0.0, 1.0)]
    multi = parse_f_terms("1,0,0.0,1.0 ; 2,1,0.5,0.0")
    assert multi[1] == ((2, 1), 0.5, 0.0)
    with pytest.raises(ValueError):
        parse_f_terms("1,0,0.0")  # needs 4 numbers per term
