"""Frame-level object recognition on whole-image features.

A two-layer classifier (linear, ReLU, dropout, linear) is trained from
weak labels in one of two modes: "single" treats each frame's aligned
entity as a one-of-C class, "multi" gives every frame of a video that
video's full entity set as independent binary targets.  Evaluation is by
top-k accuracy and mean average precision over ranked class lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import FrameVector
from .nn import (
    AdamState,
    LinearLayer,
    adam_step,
    binary_cross_entropy,
    cross_entropy,
    dropout,
    dropout_backward,
    linear_backward,
    linear_forward,
    make_rng,
    relu,
    relu_backward,
    save_checkpoint,
    load_checkpoint,
    sigmoid,
    softmax,
)

MODES = ("single", "multi")


class RecognitionError(ValueError):
    """Raised for invalid classifier inputs or metric arguments."""


@dataclass
class RecognitionConfig:
    lr: float = 1e-4
    batch_size: int = 64
    epochs: int = 20
    hidden: int = 256
    dropout: float = 0.5
    seed: int = 0


class ClassifierModel:
    """linear(D_f -> hidden) + ReLU + dropout + linear(hidden -> C)."""

    def __init__(
        self,
        class_index: Sequence[str],
        feature_dim: int,
        mode: str,
        hidden: int = 256,
        dropout_rate: float = 0.5,
        rng: np.random.Generator | None = None,
    ):
        if mode not in MODES:
            raise RecognitionError(f"mode must be one of {MODES}, got {mode!r}")
        if not class_index:
            raise RecognitionError("class index is empty")
        if len(set(class_index)) != len(class_index):
            raise RecognitionError("class index contains duplicates")
        self.class_index = list(class_index)
        self.mode = mode
        self.dropout_rate = dropout_rate
        init_rng = rng if rng is not None else make_rng(0, "init")
        self.layer1 = LinearLayer.init(feature_dim, hidden, init_rng)
        self.layer2 = LinearLayer.init(hidden, len(class_index), init_rng)

    @property
    def feature_dim(self) -> int:
        return self.layer1.n_in

    @property
    def n_classes(self) -> int:
        return len(self.class_index)

    def params(self) -> dict[str, np.ndarray]:
        return {
            "layer1.weights": self.layer1.weights,
            "layer1.bias": self.layer1.bias,
            "layer2.weights": self.layer2.weights,
            "layer2.bias": self.layer2.bias,
        }

    def logits(
        self, features: np.ndarray, training: bool = False, rng: np.random.Generator | None = None
    ):
        """Forward pass; returns (logits, cache) — cache feeds :meth:`backward`."""
        x = np.atleast_2d(features)
        if x.shape[1] != self.feature_dim:
            raise RecognitionError(
                f"feature dim {x.shape[1]} does not match model dim {self.feature_dim}"
            )
        z1 = linear_forward(self.layer1, x)
        h = relu(z1)
        hd, mask = dropout(h, self.dropout_rate, rng, training)
        out = linear_forward(self.layer2, hd)
        return out, (x, z1, hd, mask)

    def backward(self, cache, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
        x, z1, hd, mask = cache
        gw2, gb2, dhd = linear_backward(self.layer2, hd, np.atleast_2d(grad_logits))
        dh = dropout_backward(dhd, mask)
        dz1 = relu_backward(z1, dh)
        gw1, gb1, _ = linear_backward(self.layer1, x, dz1)
        return {
            "layer1.weights": gw1,
            "layer1.bias": gb1,
            "layer2.weights": gw2,
            "layer2.bias": gb2,
        }

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Class scores at eval time: softmax rows (single) or sigmoid (multi)."""
        out, _ = self.logits(features, training=False)
        return softmax(out, axis=1) if self.mode == "single" else sigmoid(out)

    def save(self, sink) -> None:
        meta = {
            "model": "classifier",
            "mode": self.mode,
            "class_index": self.class_index,
            "feature_dim": self.feature_dim,
            "hidden": self.layer1.n_out,
            "dropout": self.dropout_rate,
        }
        save_checkpoint(sink, self.params(), meta)

    @classmethod
    def load(cls, source) -> "ClassifierModel":
        meta, tensors = load_checkpoint(source)
        if meta.get("model") != "classifier":
            raise RecognitionError(f"checkpoint holds a {meta.get('model')!r} model, not a classifier")
        model = cls.__new__(cls)
        model.class_index = list(meta["class_index"])
        model.mode = meta["mode"]
        model.dropout_rate = float(meta["dropout"])
        model.layer1 = LinearLayer(tensors["layer1.weights"], tensors["layer1.bias"])
        model.layer2 = LinearLayer(tensors["layer2.weights"], tensors["layer2.bias"])
        return model


def _class_targets(
    frames: Sequence[FrameVector],
    mode: str,
    video_labels: Mapping[str, set[str]] | None,
    class_index: Sequence[str] | None,
):
    """Resolve the class list and per-frame targets, validating labels up front."""
    if mode == "single":
        labels = []
        for f in frames:
            if not f.entity:
                raise RecognitionError(f"frame {f.frame_id!r} has no entity label")
            labels.append(f.entity)
        index = list(class_index) if class_index is not None else sorted(set(labels))
        position = {e: i for i, e in enumerate(index)}
        unknown = sorted({e for e in labels if e not in position})
        if unknown:
            raise RecognitionError("labels missing from class index: " + ", ".join(unknown))
        targets = np.asarray([position[e] for e in labels], dtype=np.intp)
        return index, targets
    if video_labels is None:
        raise RecognitionError("multi mode needs video_labels")
    label_sets = []
    for f in frames:
        if f.video_id not in video_labels:
            raise RecognitionError(f"video {f.video_id!r} has no label set")
        label_sets.append(video_labels[f.video_id])
    index = (
        list(class_index)
        if class_index is not None
        else sorted(set().union(*label_sets) if label_sets else set())
    )
    position = {e: i for i, e in enumerate(index)}
    unknown = sorted({e for s in label_sets for e in s if e not in position})
    if unknown:
        raise RecognitionError("labels missing from class index: " + ", ".join(unknown))
    targets = np.zeros((len(frames), len(index)))
    for row, label_set in enumerate(label_sets):
        for e in label_set:
            targets[row, position[e]] = 1.0
    return index, targets


def train_classifier(
    frames: Sequence[FrameVector],
    cfg: RecognitionConfig,
    mode: str = "single",
    video_labels: Mapping[str, set[str]] | None = None,
    class_index: Sequence[str] | None = None,
) -> tuple[ClassifierModel, list[float]]:
    """Train a classifier with Adam; returns the model and per-epoch mean loss.

    The run is fully determined by ``cfg.seed``: initialisation, epoch
    shuffles, and dropout masks each draw from their own derived stream.
    """
    if mode not in MODES:
        raise RecognitionError(f"mode must be one of {MODES}, got {mode!r}")
    if not frames:
        raise RecognitionError("no training frames")
    dims = {f.feature.size for f in frames}
    if len(dims) != 1:
        raise RecognitionError(f"inconsistent feature dims: {sorted(dims)}")
    index, targets = _class_targets(frames, mode, video_labels, class_index)
    features = np.stack([f.feature for f in frames])

    model = ClassifierModel(
        class_index=index,
        feature_dim=features.shape[1],
        mode=mode,
        hidden=cfg.hidden,
        dropout_rate=cfg.dropout,
        rng=make_rng(cfg.seed, "init"),
    )
    params = model.params()
    adam = AdamState(lr=cfg.lr)
    trace: list[float] = []
    n = len(frames)
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(n)
        drop_rng = make_rng(cfg.seed, "dropout", epoch)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            out, cache = model.logits(features[batch], training=True, rng=drop_rng)
            if mode == "single":
                loss, grad_out = cross_entropy(out, targets[batch])
            else:
                loss, grad_out = binary_cross_entropy(out, targets[batch])
            grads = model.backward(cache, grad_out)
            adam_step(adam, params, grads)
            epoch_losses.append(loss)
        trace.append(float(np.mean(epoch_losses)))
    return model, trace


# ---------------------------------------------------------------------------
# Ranking and metrics


def predict_topk(model: ClassifierModel, feature: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-k classes for one feature vector, best first.

    Ties break toward the lower class-index position (stable sort on
    negated scores), so equal logits yield class-index order.
    """
    if k < 1:
        raise RecognitionError(f"k must be >= 1, got {k}")
    scores = model.scores(np.asarray(feature, dtype=np.float64))[0]
    order = np.argsort(-scores, kind="stable")[: min(k, len(scores))]
    return [(model.class_index[i], float(scores[i])) for i in order]


def rank_frames(
    model: ClassifierModel, frames: Sequence[FrameVector], k: int
) -> dict[str, list[tuple[str, float]]]:
    """Ranked top-k class lists for many frames at once, keyed by frame id."""
    if k < 1:
        raise RecognitionError(f"k must be >= 1, got {k}")
    if not frames:
        return {}
    scores = model.scores(np.stack([f.feature for f in frames]))
    ranked: dict[str, list[tuple[str, float]]] = {}
    for frame, row in zip(frames, scores):
        order = np.argsort(-row, kind="stable")[: min(k, len(row))]
        ranked[frame.frame_id] = [(model.class_index[i], float(row[i])) for i in order]
    return ranked


def _names(ranked: Sequence) -> list[str]:
    return [item if isinstance(item, str) else item[0] for item in ranked]


def top_k_accuracy(predictions: Mapping[str, Sequence], gold: Mapping[str, str], k: int) -> float:
    """Percentage of frames whose gold entity appears in the first k predictions.

    ``predictions`` maps frame id to a ranked sequence of entities (or
    (entity, score) tuples).  Every predicted frame must have a gold label.
    """
    if k < 1:
        raise RecognitionError(f"k must be >= 1, got {k}")
    if not predictions:
        raise RecognitionError("no predictions to score")
    hits = 0
    for frame_id, ranked in predictions.items():
        if frame_id not in gold:
            raise RecognitionError(f"no gold label for frame {frame_id!r}")
        if gold[frame_id] in _names(ranked)[:k]:
            hits += 1
    return 100.0 * hits / len(predictions)


def average_precision_at_k(ranked: Sequence, gold_set: set[str], k: int) -> float:
    """AP@k: precision summed at relevant ranks, normalised by min(|gold|, k).

    The normaliser makes a perfect ranking score 1.0 even when the gold set
    is larger than k.
    """
    if k < 1:
        raise RecognitionError(f"k must be >= 1, got {k}")
    if not gold_set:
        raise RecognitionError("empty gold set (exclude unlabeled images upstream)")
    hits = 0
    total = 0.0
    for rank, name in enumerate(_names(ranked)[:k], start=1):
        if name in gold_set:
            hits += 1
            total += hits / rank
    return total / min(len(gold_set), k)


def map_at_k(ap_values: Iterable[float]) -> float:
    """Mean of per-image AP@k values."""
    values = list(ap_values)
    if not values:
        raise RecognitionError("no AP values to average")
    return float(np.mean(values))
