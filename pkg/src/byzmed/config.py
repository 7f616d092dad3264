"""JSON (de)serialization of experiment configs and run manifests.

A config file is a JSON object with nested sections::

    {
      "n_workers": 20, "rounds": 500, "batch_size": 32, "seed": 0,
      "num_servers": 1, "eval_every": 10, "record_timing": false,
      "lr": {"kind": "constant", "gamma": 0.1},
      "aggregator": {"kind": "meamed", "q": 6},
      "attack": {"kind": "gaussian", "q": 6, "sigma": 200.0},
      "problem": {"kind": "logistic", "params": {"n_samples": 2000}},
      "grid": {"aggregators": [...], "attacks": [...]}
    }

Every section and key is optional and falls back to its default.  ``grid`` is
only read by :func:`load_manifest`; its entries are partial sections merged
over the base ``aggregator``/``attack``.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .aggregators import AggregatorSpec
from .attacks import AttackSpec
from .gradcore import ContractError
from .problems import ProblemSpec
from .simulator import ExperimentConfig, LRSchedule


class ConfigError(ValueError):
    """A config document failed to parse or validate; the message names the field."""


_SECTIONS = {
    "lr": LRSchedule,
    "aggregator": AggregatorSpec,
    "attack": AttackSpec,
    "problem": ProblemSpec,
}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}; allowed: {', '.join(sorted(names))}")
    kwargs = dict(data)
    if cls is AttackSpec and "bit_positions" in kwargs:
        kwargs["bit_positions"] = tuple(kwargs["bit_positions"])
    try:
        return cls(**kwargs)
    except ContractError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    data = {k: v for k, v in data.items() if k != "grid"}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except ContractError as exc:
        raise ConfigError(f"config: {exc}") from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    out = dataclasses.asdict(config)
    out["attack"]["bit_positions"] = list(out["attack"]["bit_positions"])
    return out


def dumps_config(config: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())


@dataclass
class Cell:
    name: str
    config: ExperimentConfig


@dataclass
class RunManifest:
    config_path: Path
    out_dir: Path
    replicates: int = 1
    seed_base: int = 0
    cells: list[Cell] = field(default_factory=list)


def expand_grid(data: dict) -> list[Cell]:
    """Cross product of ``grid.aggregators`` x ``grid.attacks`` over the base config.

    Cells are named ``{aggregator}__{attack}`` from each entry's ``name`` or,
    failing that, its resolved kind.
    """
    base = {k: v for k, v in data.items() if k != "grid"}
    grid = data.get("grid") or {}
    if not isinstance(grid, dict):
        raise ConfigError("grid: expected an object")
    unknown = sorted(set(grid) - {"aggregators", "attacks"})
    if unknown:
        raise ConfigError(f"grid: unknown field(s) {', '.join(unknown)}")
    aggs = grid.get("aggregators") or [None]
    attacks = grid.get("attacks") or [None]
    cells = []
    for a in aggs:
        for b in attacks:
            doc = json.loads(json.dumps(base))
            labels = []
            for key, entry in (("aggregator", a), ("attack", b)):
                label = None
                if entry is not None:
                    if not isinstance(entry, dict):
                        raise ConfigError(f"grid.{key}s: entries must be objects")
                    label = entry.get("name")
                    doc[key] = {**doc.get(key, {}), **{k: v for k, v in entry.items() if k != "name"}}
                labels.append(label)
            config = config_from_dict(doc)
            name = f"{labels[0] or config.aggregator.kind}__{labels[1] or config.attack.kind}"
            cells.append(Cell(name=name, config=config))
    names = [c.name for c in cells]
    if len(set(names)) != len(names):
        raise ConfigError("grid: cell names collide; give entries distinct 'name' fields")
    return cells


def load_manifest(config_path, out_dir, replicates: int = 1, seed_base: int | None = None) -> RunManifest:
    path = Path(config_path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from exc
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    cells = expand_grid(data)
    if seed_base is None:
        seed_base = cells[0].config.seed
    return RunManifest(config_path=path, out_dir=Path(out_dir), replicates=replicates,
                       seed_base=seed_base, cells=cells)
