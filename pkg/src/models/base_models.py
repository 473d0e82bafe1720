import sys
from typing import ClassVar

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict


class RecordModel(BaseModel):
    """Base class for every record written as one JSON line.

    Fields named ``*_ns`` or ``tokens_per_sec`` hold wall-clock measurements and are
    excluded when comparing two runs for determinism.
    """

    model_config = ConfigDict(extra="forbid")

    WALL_CLOCK_SUFFIXES: ClassVar[tuple[str, ...]] = ("_ns", "tokens_per_sec")

    def to_line(self) -> str:
        """Serialize to a single JSON line without the trailing newline."""
        return self.model_dump_json()

    @classmethod
    def from_line(cls, line: str) -> Self:
        return cls.model_validate_json(line)

    def deterministic_fields(self) -> dict:
        """Dump without wall-clock fields."""
        data = self.model_dump(mode="json")
        return {k: v for k, v in data.items() if not k.endswith(self.WALL_CLOCK_SUFFIXES)}


class ConfigModel(BaseModel):
    """Base class for configuration blocks: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)
