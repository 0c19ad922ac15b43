"""Mini-batch gradient descent with through-time backprop and norm clipping."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyDataset, NonFiniteLoss
from .model import LABEL_INDEX, LABELS, ModelConfig, SequenceModel, build_vocab

CLIP_NORM = 5.0


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.5
    epochs: int = 10
    batch_size: int = 16
    seed: int = 7


@dataclass
class TrainingResult:
    model: SequenceModel
    loss_curve: list[float] = field(default_factory=list)


def load_dataset(path: str) -> list[tuple[str, str]]:
    """JSONL of {"sentence": ..., "label": ...} rows."""
    rows: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            rows.append((obj["sentence"], obj["label"]))
    return rows


def dump_dataset(rows: Sequence[tuple[str, str]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, label in rows:
            fh.write(json.dumps({"sentence": sentence, "label": label}, ensure_ascii=False))
            fh.write("\n")


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = CLIP_NORM) -> float:
    """Scale the whole gradient down to max_norm when it exceeds it."""
    total = 0.0
    for arr in grads.values():
        total += float(np.sum(arr * arr))
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for name in grads:
            grads[name] *= scale
    return norm


def train(
    dataset: Sequence[tuple[str, str]],
    params: TrainParams = TrainParams(),
    config: ModelConfig = ModelConfig(),
    model: Optional[SequenceModel] = None,
) -> TrainingResult:
    """Fit a SequenceModel on (sentence, label) pairs.

    The seed fixes initialization, shuffling, and dropout, so two runs with
    the same inputs produce the same loss curve. Loss going non-finite
    aborts with the offending epoch/batch in the message.
    """
    if not dataset:
        raise EmptyDataset("training dataset is empty")
    for sentence, label in dataset:
        if label not in LABEL_INDEX:
            raise ValueError(f"unknown label {label!r} for sentence {sentence!r}")
    rng = np.random.default_rng(params.seed)
    if model is None:
        vocab = build_vocab([s for s, _ in dataset], config.vocab_size)
        model = SequenceModel.initialize(config, vocab, rng)
    encoded = [
        (model.token_ids(sentence), LABEL_INDEX[label]) for sentence, label in dataset
    ]
    curve: list[float] = []
    for epoch in range(params.epochs):
        order = rng.permutation(len(encoded))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(encoded), params.batch_size):
            batch = [encoded[i] for i in order[start : start + params.batch_size]]
            loss, grads = model.batch_loss_and_grads(batch, train=True, rng=rng)
            if not math.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss became {loss} at epoch {epoch} batch {batches}"
                )
            clip_gradients(grads)
            for name, grad in grads.items():
                model.params[name] -= params.learning_rate * grad
            epoch_loss += loss
            batches += 1
        curve.append(epoch_loss / batches)
    return TrainingResult(model=model, loss_curve=curve)


def evaluate_accuracy(model: SequenceModel, dataset: Sequence[tuple[str, str]]) -> float:
    if not dataset:
        raise EmptyDataset("evaluation dataset is empty")
    hits = 0
    for sentence, label in dataset:
        if model.predict(sentence) == label:
            hits += 1
    return hits / len(dataset)


def split_dataset(
    dataset: Sequence[tuple[str, str]], held_out_fraction: float, seed: int
) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    cut = int(round(len(dataset) * (1.0 - held_out_fraction)))
    train_rows = [dataset[i] for i in order[:cut]]
    test_rows = [dataset[i] for i in order[cut:]]
    return train_rows, test_rows
