from pathlib import Path

import pytest
import yaml

from semkge.tools.config import (
    DEFAULTS,
    REPO_ROOT,
    build_run_config,
    load_config_file,
    load_presets,
    preset_values,
)
from semkge.tools.errors import SemKgeError


def _yaml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    cfg = build_run_config()
    train = cfg.train_config()
    assert train.model == "transe"
    assert train.loss.name == "PHL"
    assert train.max_epochs == 400 and train.batch_size == 128
    assert cfg.ks() == (1, 3, 10)
    assert cfg.output_dir == Path("out").absolute()


def test_model_picks_default_family():
    assert build_run_config(overrides={"train": {"model": "complex"}}).loss_spec().family == "pll"
    assert build_run_config(overrides={"train": {"model": "distmult"}}).loss_spec().family == "phl"


def test_unknown_keys_and_sections_are_rejected(tmp_path: Path):
    with pytest.raises(SemKgeError) as e:
        load_config_file(_yaml(tmp_path / "a.yaml", "train:\n  learning_rate: 0.1\n"))
    assert e.value.code == 1
    assert "train.learning_rate" in e.value.context
    with pytest.raises(SemKgeError):
        load_config_file(_yaml(tmp_path / "b.yaml", "optimizer:\n  lr: 0.1\n"))
    with pytest.raises(SemKgeError):
        load_config_file(_yaml(tmp_path / "c.yaml", "grid:\n  lr: 0.1\n"))


def test_exponent_strings_become_floats(tmp_path: Path):
    values = load_config_file(_yaml(tmp_path / "c.yaml", "train:\n  lr: 1e-3\n  dim: 64\nloss:\n  epsilon: 25e-2\n"))
    assert values["train"]["lr"] == 0.001
    assert values["loss"]["epsilon"] == 0.25
    with pytest.raises(SemKgeError):
        load_config_file(_yaml(tmp_path / "d.yaml", "train:\n  dim: 6.5\n"))


def test_bad_yaml_and_missing_file(tmp_path: Path):
    with pytest.raises(SemKgeError) as e:
        load_config_file(_yaml(tmp_path / "bad.yaml", "train: [unclosed\n"))
    assert e.value.code == 1
    with pytest.raises(SemKgeError) as e:
        load_config_file(tmp_path / "absent.yaml")
    assert e.value.code == 2


def test_paths_resolve_against_the_config_folder(tmp_path: Path):
    (tmp_path / "conf").mkdir()
    values = load_config_file(_yaml(tmp_path / "conf" / "run.yaml", "data:\n  dir: ../data\noutput:\n  dir: runs\n"))
    cfg = build_run_config(values)
    assert cfg.values["data"]["train"].resolve() == (tmp_path / "data" / "train.tsv").resolve()
    assert cfg.output_dir.resolve() == (tmp_path / "conf" / "runs").resolve()


def test_data_paths_must_be_set_and_exist(tmp_path: Path):
    with pytest.raises(SemKgeError) as e:
        build_run_config().data_paths()
    assert "data.train" in e.value.context
    cfg = build_run_config(overrides={"data": {"dir": str(tmp_path)}})
    with pytest.raises(SemKgeError) as e:
        cfg.data_paths()
    assert "train.tsv" in e.value.context


def test_presets_and_alternative_settings():
    presets = load_presets()
    assert len(presets) == 15
    base = preset_values("complex/yago14k", "S")
    assert base["train"]["lr"] == 0.01
    assert base["loss"]["epsilon"] == 0.015
    alt = preset_values("ComplEx/Yago14k", "S'")
    assert alt["train"]["lr"] == 0.001
    assert alt["loss"]["epsilon"] == 0.01
    assert preset_values("distmult/fb15k187")["train"]["lr"] == 10.0
    with pytest.raises(SemKgeError):
        preset_values("rescal/yago14k")


def test_precedence_file_then_preset_then_flags():
    file_values = {"train": {"dim": 32, "lr": 0.5, "seed": 9}}
    cfg = build_run_config(file_values, preset="transe/yago14k", overrides={"train": {"lr": 0.02}})
    train = cfg.section("train")
    assert train["dim"] == 100  # preset beats file
    assert train["lr"] == 0.02  # flag beats preset
    assert train["seed"] == 9  # file beats default


def test_preset_selects_its_model_and_default_loss():
    train = build_run_config(preset="complex/yago14k").train_config()
    assert train.model == "complex"
    assert train.loss.name == "PLL"
    assert (train.lr, train.dim, train.batch_size) == (0.01, 100, 1024)
    file_model = build_run_config({"train": {"model": "transe"}}, preset="distmult/fb15k187")
    assert file_model.train_config().model == "distmult"


def test_model_flag_beats_preset_model():
    cfg = build_run_config(preset="complex/yago14k", overrides={"train": {"model": "transh"}})
    train = cfg.train_config()
    assert train.model == "transh"
    assert train.loss.family == "phl"
    assert train.dim == 100


def test_paths_are_absolute_in_the_effective_config(tmp_path: Path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = build_run_config(overrides={"data": {"dir": "data"}, "output": {"dir": "run"}})
    assert cfg.output_dir == tmp_path / "run"
    assert cfg.values["data"]["train"] == tmp_path / "data" / "train.tsv"
    cfg.write(tmp_path / "run" / "config.yaml")
    echoed = yaml.safe_load((tmp_path / "run" / "config.yaml").read_text(encoding="utf-8"))
    assert echoed["data"]["train"] == str(tmp_path / "data" / "train.tsv")


def test_preset_follows_variant_from_flags():
    cfg = build_run_config(
        preset="simple/dbpedia77k",
        overrides={"loss": {"variant": "S'"}},
    )
    spec = cfg.loss_spec()
    assert spec.name == "PLL-S'"
    assert spec.epsilon == -0.1
    assert cfg.section("train")["lr"] == 0.001


def test_none_overrides_do_not_mask_lower_layers():
    cfg = build_run_config({"train": {"dim": 12}}, overrides={"train": {"dim": None}})
    assert cfg.section("train")["dim"] == 12


def test_effective_config_round_trips(tmp_path: Path):
    cfg = build_run_config(
        {"grid": {"margin": [1.0, 2.0]}},
        overrides={"loss": {"variant": "S", "epsilon": 0.25}, "data": {"dir": str(tmp_path)}},
    )
    path = tmp_path / "out" / "config.yaml"
    cfg.write(path)
    again = build_run_config(load_config_file(path))
    assert again.train_config() == cfg.train_config()
    assert again.values["data"]["train"] == tmp_path / "train.tsv"
    assert again.section("grid") == {"margin": [1.0, 2.0]}
    assert set(yaml.safe_load(path.read_text(encoding="utf-8"))) == set(DEFAULTS)


def test_shipped_example_config_is_valid():
    values = load_config_file(REPO_ROOT / "data" / "example_config.yaml")
    cfg = build_run_config(values)
    assert cfg.train_config().loss.name == "PHL-S"
    assert cfg.section("grid")["margin"] == [1.0, 2.0, 3.0, 5.0, 10.0, 20.0]
