"""Run configuration from a sectioned YAML file, presets and CLI flags.

Sources are layered as: defaults < config file < preset < CLI flags. Paths in
the effective configuration are absolute, so the dumped YAML re-loads from any
working directory and repeats the run exactly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from semkge.tools.errors import config_error, io_error
from semkge.tools.ingest import DEFAULT_MIN_CANDIDATES, DatasetPaths
from semkge.tools.losses import LossSpec, normalize_variant
from semkge.tools.models import get_model
from semkge.tools.trainer import TrainConfig

REPO_ROOT = Path(__file__).resolve().parents[3]
PRESETS_PATH = REPO_ROOT / "data" / "presets.json"

DATA_FILES = ("train", "valid", "test", "entity_types", "domains", "ranges")

DEFAULTS: dict[str, dict[str, Any]] = {
    "data": {"dir": None, **{name: None for name in DATA_FILES}, "min_candidates": DEFAULT_MIN_CANDIDATES},
    "train": {
        "model": "transe",
        "batch_size": 128,
        "dim": 50,
        "lr": 1e-3,
        "regularizer": "none",
        "reg_weight": 0.0,
        "max_epochs": 400,
        "seed": 0,
        "eval_every": 10,
        "threads": 1,
    },
    "loss": {"family": None, "variant": "vanilla", "margin": 1.0, "epsilon": None, "seed": 0},
    "eval": {
        "split": "test",
        "mode": "filtered",
        "ks": [1, 3, 10],
        "ties": "optimistic",
        "buckets": None,
    },
    "grid": {},
    "output": {"dir": "out"},
}

FLOAT_KEYS = {"lr", "reg_weight", "margin", "epsilon"}
INT_KEYS = {"batch_size", "dim", "max_epochs", "seed", "eval_every", "threads", "min_candidates"}
PATH_KEYS = {("data", "dir"), *(("data", name) for name in DATA_FILES), ("output", "dir")}


def _coerce(key: str, value: Any, where: str) -> Any:
    if value is None:
        return None
    try:
        if key in FLOAT_KEYS:
            if isinstance(value, bool):
                raise ValueError("booleans are not numbers")
            return float(value)
        if key in INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError("expected an integer")
            return int(value)
    except (TypeError, ValueError) as e:
        raise config_error(f"{where}: {value!r} is not a valid {key} ({e})") from e
    return value


def _check_sections(raw: Any, source: str) -> dict[str, dict[str, Any]]:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise config_error(f"{source}: top level must be a mapping of sections")
    out: dict[str, dict[str, Any]] = {}
    for section, values in raw.items():
        if section not in DEFAULTS:
            raise config_error(
                f"{source}: unknown section {section!r}",
                f"Use only: {', '.join(DEFAULTS)}",
            )
        if values is None:
            values = {}
        if not isinstance(values, Mapping):
            raise config_error(f"{source}: section {section!r} must be a mapping")
        checked = {}
        for key, value in values.items():
            if section == "grid":
                if not isinstance(value, list):
                    raise config_error(f"{source}: grid axis {key!r} must be a list of values")
                checked[key] = [_coerce(key, v, f"{source} grid.{key}") for v in value]
                continue
            if key not in DEFAULTS[section]:
                raise config_error(
                    f"{source}: unknown key {section}.{key}",
                    f"Valid keys for [{section}]: {', '.join(DEFAULTS[section])}",
                )
            checked[key] = _coerce(key, value, f"{source} {section}.{key}")
        out[section] = checked
    return out


def _resolve_paths(values: dict[str, dict[str, Any]], base: Path) -> None:
    for section, key in PATH_KEYS:
        value = values.get(section, {}).get(key)
        if value is not None:
            path = Path(value).expanduser()
            values[section][key] = path if path.is_absolute() else base / path
    buckets = values.get("eval", {}).get("buckets")
    if buckets is not None and (base / str(buckets)).exists():
        values["eval"]["buckets"] = base / str(buckets)


def load_config_file(path: Path) -> dict[str, dict[str, Any]]:
    """Validated sections of a YAML config; relative paths resolve against its folder."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    except yaml.YAMLError as e:
        raise config_error(f"{path}: not valid YAML ({e})") from e
    values = _check_sections(raw, str(path))
    _resolve_paths(values, path.resolve().parent)
    return values


def load_presets(path: Path = PRESETS_PATH) -> dict[str, dict[str, Any]]:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise io_error(str(path), str(e)) from e


def preset_values(name: str, variant: str = "vanilla", presets: Mapping[str, Any] | None = None) -> dict[str, dict[str, Any]]:
    """Model and train/loss values of ``model/dataset``; S' runs take the alternative-loss settings."""
    presets = load_presets() if presets is None else presets
    preset_key = name.strip().lower()
    entry = presets.get(preset_key)
    if entry is None:
        raise config_error(f"unknown preset {name!r}", f"Use one of: {', '.join(sorted(presets))}")
    chosen = {k: v for k, v in entry.items() if k != "alternative"}
    if normalize_variant(variant) == "S'" and "alternative" in entry:
        chosen.update(entry["alternative"])
    out: dict[str, dict[str, Any]] = {"train": {"model": preset_key.split("/", 1)[0]}, "loss": {}}
    for key, value in chosen.items():
        out["loss" if key in DEFAULTS["loss"] else "train"][key] = value
    return out


def _merge(into: dict[str, dict[str, Any]], layer: Mapping[str, Mapping[str, Any]]) -> None:
    for section, values in layer.items():
        for key, value in values.items():
            if value is not None:
                into.setdefault(section, {})[key] = value


@dataclass(frozen=True)
class RunConfig:
    """Effective (fully defaulted) configuration of one command."""

    values: dict[str, dict[str, Any]]

    def section(self, name: str) -> dict[str, Any]:
        return self.values[name]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output"]["dir"])

    def data_paths(self) -> DatasetPaths:
        """Dataset file paths; every one must be set and exist."""
        data = self.values["data"]
        unset = [name for name in DATA_FILES if data.get(name) is None]
        if unset:
            raise config_error(
                f"dataset file(s) not configured: {', '.join('data.' + n for n in unset)}",
                "Set data.dir (with train.tsv, valid.tsv, ...) or each data.<file> key",
            )
        paths = DatasetPaths(**{name: Path(data[name]) for name in DATA_FILES})
        missing = paths.missing()
        if missing:
            raise config_error(
                f"dataset file(s) not found: {', '.join(str(p) for p in missing)}",
                "Fix the paths in the data section or pass --data-dir",
            )
        return paths

    def loss_spec(self) -> LossSpec:
        loss = self.values["loss"]
        return LossSpec(
            family=loss["family"],
            variant=loss["variant"],
            margin=loss["margin"],
            epsilon=loss["epsilon"],
            seed=loss["seed"],
        )

    def train_config(self) -> TrainConfig:
        train = self.values["train"]
        return TrainConfig(
            model=train["model"],
            loss=self.loss_spec(),
            batch_size=train["batch_size"],
            dim=train["dim"],
            lr=train["lr"],
            regularizer=str(train["regularizer"]).lower(),
            reg_weight=train["reg_weight"],
            max_epochs=train["max_epochs"],
            seed=train["seed"],
            eval_every=train["eval_every"],
            eval_mode=self.values["eval"]["mode"],
            threads=train["threads"],
        )

    def ks(self) -> tuple[int, ...]:
        ks = self.values["eval"]["ks"]
        if not isinstance(ks, list) or not ks or any(isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in ks):
            raise config_error(f"eval.ks must be a non-empty list of positive integers, got {ks!r}")
        return tuple(sorted(set(ks)))

    def to_plain(self) -> dict[str, dict[str, Any]]:
        return {
            section: {k: (str(v) if isinstance(v, Path) else v) for k, v in values.items()}
            for section, values in self.values.items()
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_plain(), sort_keys=False, default_flow_style=False)

    def write(self, path: Path) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_yaml(), encoding="utf-8")
        except OSError as e:
            raise io_error(str(path), str(e)) from e


def build_run_config(
    file_values: Mapping[str, Mapping[str, Any]] | None = None,
    *,
    preset: str | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> RunConfig:
    """Layer defaults, file values, a preset and CLI overrides into one config."""
    file_values = file_values or {}
    overrides = _check_sections(overrides or {}, "command line")
    values = copy.deepcopy(DEFAULTS)
    _merge(values, file_values)
    if preset is not None:
        layered = copy.deepcopy(values)
        _merge(layered, overrides)
        _merge(values, preset_values(preset, layered["loss"]["variant"]))
    _merge(values, overrides)

    data = values["data"]
    if data["dir"] is not None:
        for name in DATA_FILES:
            if data[name] is None:
                data[name] = Path(data["dir"]) / f"{name}.tsv"
    for section, key in PATH_KEYS:
        if values[section].get(key) is not None:
            values[section][key] = Path(values[section][key]).expanduser().absolute()
    buckets = values["eval"]["buckets"]
    if buckets is not None and Path(buckets).exists():
        values["eval"]["buckets"] = Path(buckets).absolute()
    if values["loss"]["family"] is None:
        values["loss"]["family"] = get_model(values["train"]["model"]).default_loss
    values["loss"]["variant"] = normalize_variant(values["loss"]["variant"])
    return RunConfig(values)
