"""Corpus and parallel-data ingestion, document splitting and batching."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from pathlib import Path

import numpy as np

from src.core._exceptions import ContractError, EmptyCorpusError
from src.core.text.tokenizer import EOS_ID, PAD_ID, Vocabulary, encode
from src.core.training.corruption import split_sentences
from src.infra.logger import get_logger
from src.models.training_models import TrainingBatch, TrainingExample

logger = get_logger()

SOURCE_FILE = "src.txt"
TARGET_FILE = "tgt.txt"


def load_corpus(path: Path) -> list[str]:
    """Non-blank lines of a UTF-8 file, one document each."""
    with open(path, encoding="utf-8") as f:
        documents = [line.strip() for line in f if line.strip()]
    if not documents:
        raise EmptyCorpusError(f"{path} holds no documents")
    logger.debug(f"Loaded {len(documents)} documents from {path}")
    return documents


def load_parallel(directory: Path) -> list[tuple[str, str]]:
    """Aligned (source, target) lines from src.txt and tgt.txt."""
    with open(directory / SOURCE_FILE, encoding="utf-8") as f:
        sources = [line.rstrip("\n") for line in f]
    with open(directory / TARGET_FILE, encoding="utf-8") as f:
        targets = [line.rstrip("\n") for line in f]
    if len(sources) != len(targets):
        raise ContractError(f"{directory}: {len(sources)} source lines but {len(targets)} target lines")
    pairs = [(s, t) for s, t in zip(sources, targets, strict=True) if s.strip()]
    if not pairs:
        raise EmptyCorpusError(f"{directory} holds no pairs")
    return pairs


def write_parallel(directory: Path, pairs: Sequence[tuple[str, str]]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / SOURCE_FILE, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(f"{src}\n" for src, _ in pairs)
    with open(directory / TARGET_FILE, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(f"{tgt}\n" for _, tgt in pairs)


def prepare_documents(corpus: Sequence[str], vocab: Vocabulary, max_tokens: int) -> list[list[int]]:
    """Encode documents, splitting any longer than max_tokens at sentence boundaries.

    A single sentence longer than the limit is cut into fixed windows.
    """
    if max_tokens < 1:
        raise ContractError(f"max_tokens must be positive, got {max_tokens}")
    documents: list[list[int]] = []
    for line_no, text in enumerate(corpus):
        ids = encode(text, vocab)
        if not ids:
            continue
        if len(ids) <= max_tokens:
            documents.append(ids)
            continue

        current: list[int] = []
        for sentence in split_sentences(ids, vocab.full_stop_id):
            if len(sentence) > max_tokens:
                logger.warning(
                    f"Document {line_no}: sentence of {len(sentence)} tokens cut into windows of {max_tokens}"
                )
                if current:
                    documents.append(current)
                    current = []
                documents.extend(sentence[i : i + max_tokens] for i in range(0, len(sentence), max_tokens))
            elif len(current) + len(sentence) > max_tokens:
                documents.append(current)
                current = list(sentence)
            else:
                current.extend(sentence)
        if current:
            documents.append(current)
    if not documents:
        raise EmptyCorpusError("No document survived encoding")
    return documents


def make_examples(pairs: Sequence[tuple[str, str]], vocab: Vocabulary, decode_length: int) -> list[TrainingExample]:
    """Encode parallel text; targets get EOS and must fit decode_length."""
    examples = []
    for i, (src, tgt) in enumerate(pairs):
        src_ids = encode(src, vocab)
        tgt_ids = encode(tgt, vocab)
        if len(tgt_ids) + 1 > decode_length:
            logger.warning(f"Pair {i}: target of {len(tgt_ids)} tokens cut to {decode_length - 1}")
            tgt_ids = tgt_ids[: decode_length - 1]
        if not src_ids:
            logger.warning(f"Pair {i}: empty source skipped")
            continue
        examples.append(TrainingExample(src_ids=src_ids, tgt_ids=[*tgt_ids, EOS_ID]))
    if not examples:
        raise EmptyCorpusError("No pair survived encoding")
    return examples


def collate(examples: Sequence[TrainingExample], length: int) -> TrainingBatch:
    """Stack examples into one batch whose targets are PAD-padded to length."""
    targets = np.full((len(examples), length), PAD_ID, dtype=np.int64)
    for b, example in enumerate(examples):
        if example.length > length:
            raise ContractError(f"target of {example.length} tokens exceeds decode length {length}")
        targets[b, : example.length] = example.tgt_ids
    return TrainingBatch(sources=[list(e.src_ids) for e in examples], targets=targets)


def iterate_batches(
    examples: Sequence[TrainingExample],
    batch_size: int,
    length: int,
    rng: np.random.Generator,
) -> Iterator[TrainingBatch]:
    """Endless batches, reshuffled every epoch."""
    if not examples:
        raise EmptyCorpusError("Cannot batch an empty dataset")
    while True:
        order = rng.permutation(len(examples))
        for start in range(0, len(order), batch_size):
            yield collate([examples[i] for i in order[start : start + batch_size]], length)
