"""TOML configuration files mirroring :class:`ExperimentConfig`.

Top-level keys map onto ``ExperimentConfig`` fields; ``[selection]``,
``[classifier]`` and ``[dataset]`` tables map onto their nested types. A
``[dataset]`` table holding ``manifest = "path.csv"`` loads images from disk
instead of generating synthetic data.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import tomli

from .experiment import ClassifierSettings, ConfigError, ExperimentConfig
from .selection import SelectionConfig
from .synthetic import SyntheticSpec


def _build(cls, table: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    raw = dict(raw)
    kw = {}
    if "selection" in raw:
        kw["selection"] = _build(SelectionConfig, raw.pop("selection"), "[selection]")
    if "classifier" in raw:
        kw["classifier"] = _build(ClassifierSettings, raw.pop("classifier"), "[classifier]")
    if "dataset" in raw:
        ds = dict(raw.pop("dataset"))
        if "manifest" in ds:
            if len(ds) != 1:
                raise ConfigError("[dataset] with a manifest takes no other keys")
            path = Path(ds["manifest"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            kw["dataset"] = str(path)
        else:
            kw["dataset"] = _build(SyntheticSpec, ds, "[dataset]")
            try:
                kw["dataset"].validate()
            except ValueError as exc:
                raise ConfigError(f"[dataset]: {exc}") from exc
    for key in ("selection", "classifier", "dataset"):
        raw.pop(key, None)
    raw.update(kw)
    return _build(ExperimentConfig, raw, "config")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def config_to_toml(config: ExperimentConfig) -> str:
    """Render a config back to TOML (round-trips through :func:`config_from_dict`)."""
    def value(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return repr(v)

    lines, tables = [], []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if v is None:
            continue
        if dataclasses.is_dataclass(v):
            tables.append((f.name, dataclasses.asdict(v)))
        elif f.name == "dataset":
            tables.append(("dataset", {"manifest": v}))
        else:
            lines.append(f"{f.name} = {value(v)}")
    for name, table in tables:
        lines.append(f"\n[{name}]")
        lines.extend(f"{k} = {value(v)}" for k, v in table.items())
    return "\n".join(lines) + "\n"
