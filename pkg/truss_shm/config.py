import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from truss_shm.constants import BUILTIN_MODEL, DatabaseDefaults, FireflyDefaults, Parallelism
from truss_shm.database import grid_levels
from truss_shm.firefly import FaParams
from truss_shm.utils import config_hash, suggest
from truss_shm.utils.exceptions import ConfigError, InvalidParameterError

__all__ = ("Config", "load_config", "FA_KEYS", "DATABASE_KEYS")

log = logging.getLogger(__name__)

FA_KEYS = {
    "n": int,
    "max_generation": int,
    "alpha0": float,
    "beta0": float,
    "gamma": float,
    "delta": float,
    "m_exp": float,
}
DATABASE_KEYS = {
    "max_damaged_bars": int,
    "grid_step": int,
    "n_modes": int,
}
TOP_LEVEL_KEYS = ("model", "seed", "threads", "fa", "database")


def _fa_defaults() -> dict[str, Any]:
    return {key: getattr(FireflyDefaults, key) for key in FA_KEYS}


def _database_defaults() -> dict[str, Any]:
    return {key: getattr(DatabaseDefaults, key) for key in DATABASE_KEYS}


@dataclass(frozen=True)
class Config:
    """
    Effective settings of one command.

    `model` is a model-file path or `builtin`. The thread count never changes an output,
    so it is left out of `effective()` and of the hash written into output headers.
    """

    model: str = BUILTIN_MODEL
    seed: int = 0
    threads: int = Parallelism.threads
    fa: Mapping[str, Any] = field(default_factory=_fa_defaults)
    database: Mapping[str, Any] = field(default_factory=_database_defaults)

    def fa_params(self, dim: int = 2, seed: Optional[int] = None) -> FaParams:
        """Firefly parameters over [0, 1]^dim."""
        return FaParams.unit_box(dim, seed=self.seed if seed is None else seed, **self.fa)

    def effective(self) -> dict[str, Any]:
        """Everything that can influence an output."""
        return {
            "model": self.model,
            "seed": self.seed,
            "fa": dict(self.fa),
            "database": dict(self.database),
        }

    @property
    def digest(self) -> str:
        """Short hash of `effective()`."""
        return config_hash(self.effective())


def _unknown_key(key: str, allowed: Any, where: str) -> ConfigError:
    message = f"Unknown key {key!r} in {where}."
    if match := suggest(key, allowed):
        message += f" Did you mean {match!r}?"
    return ConfigError(message)


def _coerce_section(section: Any, schema: Mapping[str, type], where: str) -> dict[str, Any]:
    if not isinstance(section, Mapping):
        raise ConfigError(f"`{where}` must be an object.")
    values = {}
    for key, value in section.items():
        if key not in schema:
            raise _unknown_key(key, schema, f"`{where}`")
        kind = schema[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"`{where}.{key}` must be a number, got {value!r}.")
        if kind is int and float(value) != int(value):
            raise ConfigError(f"`{where}.{key}` must be an integer, got {value!r}.")
        values[key] = kind(value)
    return values


def _read_file(path: Union[str, Path]) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"Cannot read config file {path}: {error.strerror}") from error
    try:
        data = json.loads(text)
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path} is not valid JSON: {error.msg}", error.lineno, error.colno) from error
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object.")
    for key in data:
        if key not in TOP_LEVEL_KEYS:
            raise _unknown_key(key, TOP_LEVEL_KEYS, str(path))
    return data


def _merge(target: dict[str, Any], layer: Mapping[str, Any]) -> None:
    """Apply one precedence layer; None values leave the lower layers in place."""
    for key in ("model", "seed", "threads"):
        if layer.get(key) is not None:
            target[key] = layer[key]
    for section, schema in (("fa", FA_KEYS), ("database", DATABASE_KEYS)):
        values = layer.get(section)
        if values is None:
            continue
        if not isinstance(values, Mapping):
            raise ConfigError(f"`{section}` must be an object.")
        updates = {key: value for key, value in values.items() if value is not None}
        target[section].update(_coerce_section(updates, schema, section))


def _validate(config: Config) -> None:
    if isinstance(config.seed, bool) or not isinstance(config.seed, int) or config.seed < 0:
        raise ConfigError(f"`seed` must be a non-negative integer, got {config.seed!r}.")
    if isinstance(config.threads, bool) or not isinstance(config.threads, int) or config.threads < 1:
        raise ConfigError(f"`threads` must be a positive integer, got {config.threads!r}.")
    if not isinstance(config.model, str) or not config.model:
        raise ConfigError(f"`model` must be a path or {BUILTIN_MODEL!r}, got {config.model!r}.")
    try:
        config.fa_params()
        grid_levels(config.database["grid_step"])
    except InvalidParameterError as error:
        raise ConfigError(str(error)) from error
    if config.database["max_damaged_bars"] < 1:
        raise ConfigError("`database.max_damaged_bars` must be at least 1.")
    if config.database["n_modes"] < 1:
        raise ConfigError("`database.n_modes` must be at least 1.")


def load_config(path: Union[str, Path, None] = None, overrides: Optional[Mapping[str, Any]] = None) -> Config:
    """
    Merge defaults, the JSON file at `path` and command-line `overrides`, in increasing precedence.

    `overrides` has the layout of the file; keys set to None are ignored. Unknown keys
    and out-of-range values raise `ConfigError`.
    """
    merged: dict[str, Any] = {
        "model": BUILTIN_MODEL,
        "seed": 0,
        "threads": Parallelism.threads,
        "fa": _fa_defaults(),
        "database": _database_defaults(),
    }
    if path is not None:
        _merge(merged, _read_file(path))
        log.debug(f"Read configuration from {path}")
    if overrides:
        _merge(merged, overrides)

    config = Config(**merged)
    _validate(config)
    log.debug(f"Effective configuration {config.digest}: {config.effective()}")
    return config
