"""Seeded synthetic parallel tasks with short outputs."""

from __future__ import annotations

from enum import Enum
from pathlib import Path

import numpy as np

from src.core._exceptions import ContractError
from src.core.content.corpus import write_parallel
from src.infra.logger import get_logger

logger = get_logger()

MIN_LENGTH = 5
MAX_LENGTH = 24

WORDS = (
    "apple bird cloud dance earth field garden house island jungle kettle lemon mountain night ocean "
    "paper queen river stone table umbrella valley window yellow zebra bread chair dream engine forest "
    "glass honey iron juice king light music nest orange pencil rain sugar tiger voice water"
).split()

NAMES = ("alice", "bob", "carol", "dave", "erin", "frank", "grace", "henry")
CITIES = ("paris", "oslo", "lima", "cairo", "tokyo", "rome", "delhi", "quito")
COLORS = ("red", "blue", "green", "black", "white", "orange", "amber", "indigo", "ivory", "olive")
OBJECTS = ("apple", "book", "hat", "umbrella", "car", "egg", "lamp", "owl")


class SyntheticTask(str, Enum):
    COPY = "copy"
    REVERSE = "reverse"
    TEMPLATE = "template"


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _template_pair(rng: np.random.Generator) -> tuple[str, str]:
    """Slot list in shuffled order -> sentence whose article agrees with the colour that follows it.

    Each clause has 7 words; 1-3 clauses joined by "and" plus a full stop keep the
    target between 8 and 24 tokens.
    """
    clauses = int(rng.integers(1, 4))
    source_parts: list[str] = []
    target_parts: list[str] = []
    for _ in range(clauses):
        slots = {
            "name": NAMES[rng.integers(len(NAMES))],
            "city": CITIES[rng.integers(len(CITIES))],
            "color": COLORS[rng.integers(len(COLORS))],
            "object": OBJECTS[rng.integers(len(OBJECTS))],
        }
        keys = list(slots)
        order = rng.permutation(len(keys))
        source_parts.append(" ".join(f"{keys[i]} {slots[keys[i]]}" for i in order))
        target_parts.append(
            f"{slots['name']} from {slots['city']} has {_article(slots['color'])} {slots['color']} {slots['object']}"
        )
    return " ; ".join(source_parts), " and ".join(target_parts) + " ."


def make_pairs(task: SyntheticTask, size: int, seed: int) -> list[tuple[str, str]]:
    """Deterministic (source, target) pairs for a task."""
    if size < 1:
        raise ContractError(f"size must be at least 1, got {size}")
    task = SyntheticTask(task)
    rng = np.random.default_rng([seed, list(SyntheticTask).index(task)])
    pairs = []
    for _ in range(size):
        if task is SyntheticTask.TEMPLATE:
            pairs.append(_template_pair(rng))
            continue
        length = int(rng.integers(MIN_LENGTH, MAX_LENGTH + 1))
        words = [WORDS[i] for i in rng.integers(len(WORDS), size=length)]
        target = words if task is SyntheticTask.COPY else words[::-1]
        pairs.append((" ".join(words), " ".join(target)))
    return pairs


def make_synthetic(task: SyntheticTask, size: int, seed: int, out_dir: Path) -> list[tuple[str, str]]:
    """Write src.txt/tgt.txt for a task into out_dir and return the pairs."""
    pairs = make_pairs(task, size, seed)
    write_parallel(out_dir, pairs)
    logger.info(f"Wrote {len(pairs)} {SyntheticTask(task).value} pairs to {out_dir}")
    return pairs
