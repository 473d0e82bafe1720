import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from src.core.content.corpus import make_examples, write_parallel
from src.core.content.synthetic import WORDS, SyntheticTask, make_pairs
from src.core.modeling.transformer import Model
from src.core.text.tokenizer import Vocabulary, build_vocab
from src.infra.settings import settings
from src.models.config_models import ModelConfig
from src.models.training_models import TrainingExample


@pytest.fixture(autouse=True)
def mock_environment_variables(monkeypatch):
    """Run every test in a clean CI-like environment without progress bars or Logfire."""
    env_vars = {"ENVIRONMENT": "ci", "DEBUG": "false", "OFFRAMP_PROGRESS": "false"}
    monkeypatch.setattr(settings, "progress_bars", False)
    with patch.dict(os.environ, env_vars, clear=True):
        yield


@pytest.fixture(scope="session")
def copy_pairs():
    """Small deterministic copy-task dataset."""
    return make_pairs(SyntheticTask.COPY, 40, seed=0)


@pytest.fixture(scope="session")
def vocab(copy_pairs) -> Vocabulary:
    """Vocabulary over every synthetic copy word plus a full stop."""
    return build_vocab([src for src, _ in copy_pairs] + [" ".join(WORDS), "."], max_size=128)


@pytest.fixture(scope="session")
def tiny_config(vocab) -> ModelConfig:
    return ModelConfig(
        layers=3,
        d_model=16,
        heads=2,
        d_ff=32,
        max_target_len=12,
        max_source_len=16,
        vocab_size=vocab.size,
    )


@pytest.fixture
def tiny_model(tiny_config) -> Model:
    """Fresh float32 model; function-scoped because training mutates it."""
    return Model(tiny_config, seed=0)


@pytest.fixture
def model64(tiny_config) -> Model:
    """Float64 model for finite-difference checks."""
    return Model(tiny_config.model_copy(update={"layers": 2}), seed=0, dtype=np.float64)


@pytest.fixture(scope="session")
def short_examples(vocab) -> list[TrainingExample]:
    """Copy examples that fit the tiny model's decode length."""
    pairs = make_pairs(SyntheticTask.COPY, 200, seed=3)
    short = [(src, tgt) for src, tgt in pairs if len(src.split()) <= 8][:12]
    return make_examples(short, vocab, decode_length=12)


@pytest.fixture
def parallel_dir(tmp_path: Path, copy_pairs) -> Path:
    """Directory holding src.txt/tgt.txt for the copy task."""
    directory = tmp_path / "data"
    write_parallel(directory, copy_pairs)
    return directory
