"""FLOP accounting shared by every tensor operation."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar, Token
from enum import Enum


class FlopCategory(str, Enum):
    """Buckets used to attribute multiply-add work to parts of the model."""

    ENCODER = "encoder"
    SELF_ATTN = "self_attn"
    FROZEN_KV = "frozen_kv"
    CROSS_KV = "cross_kv"
    CROSS_ATTN = "cross_attn"
    FFN = "ffn"
    OFF_RAMP = "off_ramp"
    SOFT_FEEDBACK = "soft_feedback"
    OTHER = "other"


# Attention and feed-forward work that scales with the number of computed positions.
LAYER_CATEGORIES = (FlopCategory.SELF_ATTN, FlopCategory.FFN)

_active_counter: ContextVar[FlopCounter | None] = ContextVar("active_flop_counter", default=None)
_active_category: ContextVar[FlopCategory] = ContextVar("active_flop_category", default=FlopCategory.OTHER)


class FlopCounter:
    """Accumulates FLOPs by category while active as a context manager."""

    def __init__(self) -> None:
        self.by_category: Counter[str] = Counter()
        self._tokens: list[Token[FlopCounter | None]] = []

    def __enter__(self) -> FlopCounter:
        self._tokens.append(_active_counter.set(self))
        return self

    def __exit__(self, *exc_info: object) -> None:
        _active_counter.reset(self._tokens.pop())

    def add(self, flops: int, category: FlopCategory | str = FlopCategory.OTHER) -> None:
        """Add flops to a category."""
        key = category.value if isinstance(category, FlopCategory) else category
        self.by_category[key] += int(flops)

    @property
    def total(self) -> int:
        """All counted FLOPs."""
        return sum(self.by_category.values())

    def total_for(self, *categories: FlopCategory | str) -> int:
        """FLOPs summed over the given categories."""
        keys = {c.value if isinstance(c, FlopCategory) else c for c in categories}
        return sum(v for k, v in self.by_category.items() if k in keys)

    @property
    def decoder_total(self) -> int:
        """Everything except encoder work."""
        return self.total - self.by_category[FlopCategory.ENCODER.value]

    def as_dict(self) -> dict[str, int]:
        """Plain mapping sorted by category name."""
        return dict(sorted(self.by_category.items()))


@contextmanager
def flop_scope(category: FlopCategory) -> Iterator[None]:
    """Attribute FLOPs recorded inside the block to category."""
    token = _active_category.set(category)
    try:
        yield
    finally:
        _active_category.reset(token)


def record_flops(flops: int) -> None:
    """Charge flops to the active counter, if any."""
    counter = _active_counter.get()
    if counter is not None:
        counter.add(flops, _active_category.get())
