"""Linear softmax stand-in for an ML-NIDS over one-hot and z-scored packet features.

A padded topic such as ``"x "`` is a category the encoder never saw. In strict
mode its one-hot block is all zeros; in extended mode it opens a new column.
Either way the encoded vector leaves the pattern the model was trained on.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from fpa_forge.analysis.metrics import attack_success_rate, prediction_report
from fpa_forge.errors import DegenerateLabels, DimMismatch, ModelError

logger = logging.getLogger(__name__)

MODES = ("strict", "extended")
FORMAT_HEADER = "fpa-forge-surrogate 1"

Records = Union[pd.DataFrame, Sequence[Mapping[str, object]]]


def _frame(records: Records) -> pd.DataFrame:
    return records if isinstance(records, pd.DataFrame) else pd.DataFrame(list(records))


@dataclass(frozen=True)
class EncoderVocab:
    categories: Dict[str, Tuple[str, ...]]
    numeric: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    mode: str = "strict"

    @property
    def dimension(self) -> int:
        return sum(len(v) for v in self.categories.values()) + len(self.numeric)

    def column_names(self) -> List[str]:
        names = [f"{col}={value}" for col, values in self.categories.items() for value in values]
        return names + list(self.numeric)

    def extended_with(self, records: Records) -> "EncoderVocab":
        """Vocab with unseen categories appended in first-seen order."""
        df = _frame(records)
        categories = {}
        for col, values in self.categories.items():
            seen = dict.fromkeys(values)
            if col in df:
                seen.update(dict.fromkeys(str(v) for v in df[col]))
            categories[col] = tuple(seen)
        return replace(self, categories=categories)


def fit_encoder(
    records: Records,
    categorical_columns: Sequence[str],
    numeric_columns: Sequence[str] = (),
    mode: str = "strict",
) -> EncoderVocab:
    """Per categorical column, the values in first-seen order; per numeric column, mean and std."""
    if mode not in MODES:
        raise ModelError(f"encoder mode must be one of {MODES}, got {mode!r}")
    df = _frame(records)
    if df.empty:
        raise ModelError("cannot fit an encoder on no records")
    categories = {col: tuple(dict.fromkeys(str(v) for v in df[col])) for col in categorical_columns}
    numeric = {}
    for col in numeric_columns:
        values = df[col].astype(float).to_numpy()
        std = float(values.std())
        numeric[col] = (float(values.mean()), std if std > 0 else 1.0)
    return EncoderVocab(categories, numeric, mode)


def encode(vocab: EncoderVocab, record: Mapping[str, object]) -> np.ndarray:
    """One-hot blocks followed by z-scored numerics."""
    if vocab.mode == "extended":
        vocab = vocab.extended_with([record])
    parts: List[float] = []
    for col, values in vocab.categories.items():
        value = str(record.get(col, ""))
        parts.extend(1.0 if value == v else 0.0 for v in values)
    for col, (mean, std) in vocab.numeric.items():
        parts.append((float(record.get(col, 0)) - mean) / std)
    return np.array(parts)


def encode_matrix(vocab: EncoderVocab, records: Records) -> np.ndarray:
    df = _frame(records)
    if vocab.mode == "extended":
        vocab = vocab.extended_with(df)
    blocks = []
    for col, values in vocab.categories.items():
        column = df[col].astype(str).to_numpy() if col in df else np.full(len(df), "")
        blocks.append((column[:, None] == np.array(values, dtype=object)[None, :]).astype(float))
    for col, (mean, std) in vocab.numeric.items():
        column = df[col].astype(float).to_numpy() if col in df else np.zeros(len(df))
        blocks.append(((column - mean) / std)[:, None])
    if not blocks:
        return np.zeros((len(df), 0))
    return np.hstack(blocks)


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class SoftmaxModel:
    weights: np.ndarray
    bias: np.ndarray
    labels: Tuple[str, ...]
    epochs: int = 0
    learning_rate: float = 0.0
    seed: int = 0
    loss_history: Tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its gradient; Y is one-hot with one row per sample."""
    P = softmax(X @ weights.T + bias)
    n = len(X)
    loss = -float(np.sum(Y * np.log(np.clip(P, 1e-300, None)))) / n
    delta = (P - Y) / n
    return loss, delta.T @ X, delta.sum(axis=0)


def train(
    X,
    labels: Sequence,
    epochs: int = 300,
    learning_rate: float = 1.0,
    seed: int = 0,
) -> SoftmaxModel:
    """Multinomial logistic regression by full-batch gradient descent."""
    X = np.asarray(X, dtype=float)
    labels = [str(label) for label in labels]
    if X.ndim != 2 or len(X) != len(labels):
        raise DimMismatch(f"{len(X)} rows for {len(labels)} labels")
    classes = tuple(dict.fromkeys(labels))
    if len(classes) < 2:
        raise DegenerateLabels("training needs at least two classes")
    index = {label: i for i, label in enumerate(classes)}
    Y = np.zeros((len(labels), len(classes)))
    Y[np.arange(len(labels)), [index[label] for label in labels]] = 1.0

    # Step capped at 1/L with L = lambda_max([X 1]^T [X 1]) / (2n), which keeps the loss non-increasing.
    augmented = np.hstack([X, np.ones((len(X), 1))])
    smoothness = np.linalg.norm(augmented, ord=2) ** 2 / (2 * len(X))
    step = min(learning_rate, 1.0 / smoothness) if smoothness > 0 else learning_rate

    rng = np.random.default_rng(seed)
    weights = rng.normal(scale=1e-3, size=(len(classes), X.shape[1]))
    bias = np.zeros(len(classes))
    history = []
    for _ in range(epochs):
        loss, grad_w, grad_b = loss_and_gradient(weights, bias, X, Y)
        history.append(loss)
        weights = weights - step * grad_w
        bias = bias - step * grad_b
    if epochs:
        logger.info("Trained %d classes on %d x %d for %d epochs, final loss %.4f", len(classes), *X.shape, epochs, history[-1])
    return SoftmaxModel(weights, bias, classes, epochs, step, seed, tuple(history))


def predict_proba(model: SoftmaxModel, x) -> np.ndarray:
    """Class probabilities for one vector or a matrix of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise DimMismatch(f"input dimension {x.shape[-1]} does not match model dimension {model.dim}")
    return softmax(x @ model.weights.T + model.bias)


def predict(model: SoftmaxModel, X) -> List[str]:
    proba = np.atleast_2d(predict_proba(model, X))
    return [model.labels[i] for i in proba.argmax(axis=1)]


def _aligned(vocab: EncoderVocab, model: SoftmaxModel, records: Records) -> np.ndarray:
    X = encode_matrix(vocab, records)
    if vocab.mode == "extended":
        # the model only has weights for the columns it was trained on
        grown = vocab.extended_with(_frame(records)).column_names()
        known = set(vocab.column_names())
        X = X[:, [i for i, name in enumerate(grown) if name in known]]
    return X


def evaluate_fpa(
    model: SoftmaxModel,
    vocab: EncoderVocab,
    crafted_records: Records,
    benign_label: str = "Normal",
) -> Dict[str, object]:
    """Attack success rate and confidence/entropy statistics on crafted benign samples."""
    df = _frame(crafted_records)
    if df.empty:
        raise ModelError("no crafted records to evaluate")
    proba = np.atleast_2d(predict_proba(model, _aligned(vocab, model, df)))
    report = prediction_report(proba, model.labels, benign_label)
    predicted = [model.labels[i] for i in proba.argmax(axis=1)]
    report["asr"] = attack_success_rate(predicted, len(predicted), benign_label)
    report["samples"] = len(predicted)
    logger.info("ASR %.2f%% over %d crafted samples", report["asr"], len(predicted))
    return report


# ---------------------------------------------------------------------------
# Persistence


def _floats(values: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_surrogate(path: Union[str, Path], model: SoftmaxModel, vocab: Optional[EncoderVocab] = None) -> None:
    """Write model (and encoder) as line-oriented text with decimal weights."""
    lines = [
        FORMAT_HEADER,
        f"classes {len(model.labels)}",
        *(json.dumps(label) for label in model.labels),
        f"dim {model.dim}",
        f"epochs {model.epochs}",
        f"learning_rate {float(model.learning_rate)!r}",
        f"seed {model.seed}",
        f"bias {_floats(model.bias)}",
        "weights",
        *(_floats(row) for row in model.weights),
    ]
    if vocab is not None:
        lines.append(f"encoder {vocab.mode} {len(vocab.categories)} {len(vocab.numeric)}")
        for col, values in vocab.categories.items():
            lines.append(f"categorical {json.dumps(col)} {json.dumps(list(values))}")
        for col, (mean, std) in vocab.numeric.items():
            lines.append(f"numeric {json.dumps(col)} {mean!r} {std!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Saved surrogate with %d classes and dimension %d to %s", len(model.labels), model.dim, path)


def load_surrogate(path: Union[str, Path]) -> Tuple[SoftmaxModel, Optional[EncoderVocab]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise ModelError(f"{path} is not a saved surrogate model")
    try:
        it = iter(lines[1:])
        k = int(next(it).split()[1])
        labels = tuple(json.loads(next(it)) for _ in range(k))
        d = int(next(it).split()[1])
        epochs = int(next(it).split()[1])
        learning_rate = float(next(it).split()[1])
        seed = int(next(it).split()[1])
        bias = np.array([float(v) for v in next(it).split()[1:]])
        if next(it) != "weights":
            raise ModelError("missing weights section")
        weights = np.array([[float(v) for v in next(it).split()] for _ in range(k)]).reshape(k, d)
        model = SoftmaxModel(weights, bias, labels, epochs, learning_rate, seed)

        vocab = None
        header = next(it, None)
        if header is not None:
            _, mode, n_cat, n_num = header.split()
            decoder = json.JSONDecoder()
            categories = {}
            for _ in range(int(n_cat)):
                rest = next(it)[len("categorical ") :]
                col, end = decoder.raw_decode(rest)
                categories[col] = tuple(json.loads(rest[end:].strip()))
            numeric = {}
            for _ in range(int(n_num)):
                rest = next(it)[len("numeric ") :]
                col, end = decoder.raw_decode(rest)
                mean, std = rest[end:].split()
                numeric[col] = (float(mean), float(std))
            vocab = EncoderVocab(categories, numeric, mode)
    except (StopIteration, ValueError, IndexError) as exc:
        raise ModelError(f"{path} is truncated or malformed: {exc}") from exc
    if bias.shape != (k,):
        raise ModelError(f"{path} has {len(bias)} biases for {k} classes")
    return model, vocab
