"""Self-describing binary checkpoint container.

Layout: 8-byte magic, little-endian uint16 version, then a msgpack stream holding a
header map followed by one map per parameter in header order.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import msgpack
import numpy as np
from pydantic import ValidationError

from src.core._exceptions import CheckpointFormatError, CheckpointVersionError, ContractError
from src.core.modeling.transformer import Model
from src.infra.logger import get_logger
from src.models.config_models import ModelConfig

logger = get_logger()

MAGIC = b"OFFRAMP\x00"
FORMAT_VERSION = 1
FORMAT_NAME = "offramp-checkpoint"
_PREFIX_LEN = len(MAGIC) + 2


def _blob(name: str, array: np.ndarray) -> dict[str, Any]:
    contiguous = np.ascontiguousarray(array)
    return {"name": name, "dtype": contiguous.dtype.str, "shape": list(contiguous.shape), "data": contiguous.tobytes()}


def save_checkpoint(model: Model, path: Path) -> None:
    """Write every parameter bit-exactly; the file appears atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": FORMAT_NAME,
        "config": model.config.model_dump(mode="json"),
        "dtype": model.dtype.str,
        "seed": model.seed,
        "parameters": list(model.params),
    }
    packer = msgpack.Packer(use_bin_type=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(FORMAT_VERSION.to_bytes(2, "little"))
        f.write(packer.pack(header))
        for name, param in model.params.items():
            f.write(packer.pack(_blob(name, param.data)))
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint with {model.num_parameters()} parameters to {path}")


def _next_object(unpacker: msgpack.Unpacker, what: str) -> Any:
    try:
        return unpacker.unpack()
    except msgpack.OutOfData as e:
        raise CheckpointFormatError(f"truncated {what}", _PREFIX_LEN + unpacker.tell()) from e
    except ValueError as e:
        raise CheckpointFormatError(f"corrupt {what}: {e}", _PREFIX_LEN + unpacker.tell()) from e


def read_header(data: bytes) -> tuple[dict[str, Any], msgpack.Unpacker]:
    """Validate magic and version, then decode the header map."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError("bad magic, not an offramp checkpoint", 0)
    if len(data) < _PREFIX_LEN:
        raise CheckpointFormatError("truncated version field", len(MAGIC))
    version = int.from_bytes(data[len(MAGIC) : _PREFIX_LEN], "little")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version, FORMAT_VERSION)

    unpacker = msgpack.Unpacker(raw=False, max_buffer_size=max(len(data), 1))
    unpacker.feed(data[_PREFIX_LEN:])
    header = _next_object(unpacker, "header")
    required = {"format", "config", "dtype", "seed", "parameters"}
    if not isinstance(header, dict) or not required <= set(header) or header["format"] != FORMAT_NAME:
        raise CheckpointFormatError("malformed header", _PREFIX_LEN)
    return header, unpacker


def load_checkpoint(path: Path) -> Model:
    """Rebuild the model saved at path; any defect raises before a model is returned."""
    data = Path(path).read_bytes()
    header, unpacker = read_header(data)
    try:
        config = ModelConfig.model_validate(header["config"])
    except ValidationError as e:
        raise CheckpointFormatError(f"invalid model config in header: {e}", _PREFIX_LEN) from e

    state: dict[str, np.ndarray] = {}
    for name in header["parameters"]:
        offset = _PREFIX_LEN + unpacker.tell()
        blob = _next_object(unpacker, f"parameter {name!r}")
        if not isinstance(blob, dict) or blob.get("name") != name:
            raise CheckpointFormatError(f"expected parameter {name!r}", offset)
        try:
            array = np.frombuffer(blob["data"], dtype=np.dtype(blob["dtype"])).reshape(blob["shape"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointFormatError(f"parameter {name!r} is malformed: {e}", offset) from e
        state[name] = array.copy()

    trailing = len(data) - _PREFIX_LEN - unpacker.tell()
    if trailing:
        raise CheckpointFormatError(f"{trailing} unexpected trailing bytes", len(data) - trailing)

    model = Model(config, seed=int(header["seed"]), dtype=np.dtype(header["dtype"]))
    try:
        model.load_state_dict(state)
    except ContractError as e:
        raise CheckpointFormatError(f"parameters do not match the header config: {e}", _PREFIX_LEN) from e
    logger.debug(f"Loaded checkpoint {path}")
    return model
