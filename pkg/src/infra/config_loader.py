from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from src.core._exceptions import ConfigurationError
from src.infra.logger import get_logger
from src.models.config_models import RunConfig

logger = get_logger()

# Keys whose values are file system paths, resolved against the config file's directory.
_PATH_KEYS: dict[str, tuple[str, ...]] = {
    "paths": ("vocab", "corpus", "train_data", "eval_data", "checkpoint", "output_dir"),
    "training": ("init_checkpoint",),
}


def _resolve_paths(raw: dict[str, Any], base: Path) -> dict[str, Any]:
    for section, keys in _PATH_KEYS.items():
        block = raw.get(section)
        if not isinstance(block, dict):
            continue
        for key in keys:
            value = block.get(key)
            if value is not None and not Path(value).is_absolute():
                block[key] = str(base / value)
    return raw


def load_run_config(path: Path, seed: int | None = None) -> RunConfig:
    """Parse a YAML run config; ``seed`` overrides the file's seed."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file {path} does not exist") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Config file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"Config file {path} must hold a mapping at the top level")

    if seed is not None:
        raw["seed"] = seed
    raw = _resolve_paths(raw, path.parent)
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid config {path}: {e}") from e
    logger.debug(f"Loaded run config {path} (seed={config.seed})")
    return config
