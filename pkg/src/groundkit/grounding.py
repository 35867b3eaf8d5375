"""Weakly-supervised visual grounding over region proposals.

Two models localise an entity inside a frame using only frame-level pairs:

* MIL: a two-layer visual encoder and a linear word encoder meet in a joint
  space; a frame/entity score is the max over proposals of the dot product,
  trained with a max-margin hinge against in-batch negatives.
* Recon: proposals are attended by their fit to the entity embedding and the
  attention-weighted feature must reconstruct that embedding; the attention
  weights double as localisation scores.

Both predict a single proposal per (frame, entity); accuracy counts a hit
when the chosen box overlaps a gold box by at least the IoU threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import Box, EmbeddingTable, EntityFramePair, GoldAnnotation, ProposalFrame
from .nn import (
    AdamState,
    LinearLayer,
    adam_step,
    dropout,
    dropout_backward,
    linear_backward,
    linear_forward,
    load_checkpoint,
    make_rng,
    relu,
    relu_backward,
    save_checkpoint,
    sigmoid,
    softmax,
)

MIL_LR = 1e-5
RECON_LR = 1e-3


class GroundingError(ValueError):
    """Raised for invalid grounding inputs."""


@dataclass
class GroundingConfig:
    lr: float | None = None  # None picks the per-model default
    delta: float = 0.01
    batch_size: int = 64
    epochs: int = 20
    hidden: int = 512
    joint_dim: int = 100
    dropout: float = 0.2
    seed: int = 0
    freeze_target: bool = False  # recon only: stop gradients through the target embedding


# ---------------------------------------------------------------------------
# MIL model


class MilModel:
    """Max-margin scorer: phi(r) = W2 relu(W1 r), psi(e) = We e, score = phi . psi."""

    def __init__(
        self,
        visual_dim: int,
        embed_dim: int,
        hidden: int = 512,
        joint_dim: int = 100,
        dropout_rate: float = 0.2,
        rng: np.random.Generator | None = None,
    ):
        init_rng = rng if rng is not None else make_rng(0, "init")
        self.visual1 = LinearLayer.init(visual_dim, hidden, init_rng)
        self.visual2 = LinearLayer.init(hidden, joint_dim, init_rng)
        self.word = LinearLayer.init(embed_dim, joint_dim, init_rng)
        self.dropout_rate = dropout_rate

    @property
    def visual_dim(self) -> int:
        return self.visual1.n_in

    @property
    def embed_dim(self) -> int:
        return self.word.n_in

    def params(self) -> dict[str, np.ndarray]:
        return {
            "visual1.weights": self.visual1.weights,
            "visual1.bias": self.visual1.bias,
            "visual2.weights": self.visual2.weights,
            "visual2.bias": self.visual2.bias,
            "word.weights": self.word.weights,
            "word.bias": self.word.bias,
        }

    def encode_proposals(
        self, features: np.ndarray, training: bool = False, rng: np.random.Generator | None = None
    ):
        """(n, D_v) features -> (n, joint) codes plus a cache for backward."""
        x = np.atleast_2d(features)
        if x.shape[1] != self.visual_dim:
            raise GroundingError(
                f"proposal feature dim {x.shape[1]} does not match model dim {self.visual_dim}"
            )
        z1 = linear_forward(self.visual1, x)
        h = relu(z1)
        hd, mask = dropout(h, self.dropout_rate, rng, training)
        phi = linear_forward(self.visual2, hd)
        return phi, (x, z1, hd, mask)

    def backward_proposals(self, cache, grad_phi: np.ndarray) -> dict[str, np.ndarray]:
        x, z1, hd, mask = cache
        gw2, gb2, dhd = linear_backward(self.visual2, hd, grad_phi)
        dh = dropout_backward(dhd, mask)
        dz1 = relu_backward(z1, dh)
        gw1, gb1, _ = linear_backward(self.visual1, x, dz1)
        return {
            "visual1.weights": gw1,
            "visual1.bias": gb1,
            "visual2.weights": gw2,
            "visual2.bias": gb2,
        }

    def encode_entities(self, vectors: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(vectors)
        if x.shape[1] != self.embed_dim:
            raise GroundingError(
                f"entity vector dim {x.shape[1]} does not match model dim {self.embed_dim}"
            )
        return linear_forward(self.word, x)

    def save(self, sink) -> None:
        meta = {
            "model": "mil",
            "visual_dim": self.visual_dim,
            "embed_dim": self.embed_dim,
            "hidden": self.visual1.n_out,
            "joint_dim": self.visual2.n_out,
            "dropout": self.dropout_rate,
        }
        save_checkpoint(sink, self.params(), meta)

    @classmethod
    def load(cls, source) -> "MilModel":
        meta, tensors = load_checkpoint(source)
        if meta.get("model") != "mil":
            raise GroundingError(f"checkpoint holds a {meta.get('model')!r} model, not mil")
        model = cls.__new__(cls)
        model.visual1 = LinearLayer(tensors["visual1.weights"], tensors["visual1.bias"])
        model.visual2 = LinearLayer(tensors["visual2.weights"], tensors["visual2.bias"])
        model.word = LinearLayer(tensors["word.weights"], tensors["word.bias"])
        model.dropout_rate = float(meta["dropout"])
        return model


def mil_scores(
    model: MilModel,
    features: np.ndarray,
    entity_vec: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-proposal scores phi(r_k) . psi(e) for one frame; (K,) array."""
    phi, _ = model.encode_proposals(features, training=training, rng=rng)
    psi = model.encode_entities(entity_vec)[0]
    return phi @ psi

def mil_frame_score(
    model: MilModel, features: np.ndarray, entity_vec: np.ndarray
) -> tuple[float, int]:
    """Frame/entity score: the best proposal's score and its index (ties -> lowest)."""
    scores = mil_scores(model, features, entity_vec)
    k = int(np.argmax(scores))
    return float(scores[k]), k


@dataclass
class MilItem:
    """One training example: an entity name, its vector, and the frame's proposal features."""

    entity: str
    entity_vec: np.ndarray
    features: np.ndarray  # (K, D_v)


def sample_negatives(items: Sequence[MilItem], rng: np.random.Generator) -> list[int]:
    """For each item, a uniformly chosen index of an item with a different entity."""
    negatives = []
    for i, item in enumerate(items):
        others = [j for j, other in enumerate(items) if other.entity != item.entity]
        if not others:
            raise GroundingError(
                f"batch has a single distinct entity ({item.entity!r}); no negative available"
            )
        negatives.append(others[int(rng.integers(len(others)))])
    return negatives


def mil_loss(
    model: MilModel,
    items: Sequence[MilItem],
    delta: float = 0.01,
    negatives: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch hinge loss with in-batch negatives and its parameter gradients.

    For each item i with negative l: max(0, S_il - S_ii + delta) +
    max(0, S_li - S_ii + delta), where S_ab is the max-over-proposals score
    of frame a against entity b.  The batch loss is the sum over items.
    Gradients flow only through each max's winning proposal; a hinge exactly
    at its boundary contributes nothing.

    ``negatives`` pins the pairing explicitly (it must map each item to one
    with a different entity); otherwise ``rng`` samples it uniformly.
    """
    if not items:
        raise GroundingError("empty batch")
    if negatives is None:
        if rng is None:
            raise GroundingError("mil_loss needs either explicit negatives or an rng")
        negatives = sample_negatives(items, rng)
    else:
        negatives = list(negatives)
        if len(negatives) != len(items):
            raise GroundingError("negatives length does not match batch")
        for i, l in enumerate(negatives):
            if items[l].entity == items[i].entity:
                raise GroundingError(
                    f"negative for item {i} shares its entity ({items[i].entity!r})"
                )

    stacked = np.concatenate([item.features for item in items], axis=0)
    offsets = np.cumsum([0] + [item.features.shape[0] for item in items])
    phi, cache = model.encode_proposals(stacked, training=training, rng=dropout_rng)
    entity_mat = np.stack([item.entity_vec for item in items])
    psi = model.encode_entities(entity_mat)

    def pair_score(a: int, b: int) -> tuple[float, int]:
        rows = phi[offsets[a] : offsets[a + 1]]
        scores = rows @ psi[b]
        k = int(np.argmax(scores))
        return float(scores[k]), k

    loss = 0.0
    d_phi = np.zeros_like(phi)
    d_psi = np.zeros_like(psi)

    def add_score_grad(a: int, b: int, k: int, weight: float) -> None:
        row = offsets[a] + k
        d_phi[row] += weight * psi[b]
        d_psi[b] += weight * phi[row]

    for i in range(len(items)):
        l = negatives[i]
        s_ii, k_ii = pair_score(i, i)
        s_il, k_il = pair_score(i, l)
        s_li, k_li = pair_score(l, i)
        hinge_wrong_entity = s_il - s_ii + delta
        if hinge_wrong_entity > 0.0:
            loss += hinge_wrong_entity
            add_score_grad(i, l, k_il, 1.0)
            add_score_grad(i, i, k_ii, -1.0)
        hinge_wrong_frame = s_li - s_ii + delta
        if hinge_wrong_frame > 0.0:
            loss += hinge_wrong_frame
            add_score_grad(l, i, k_li, 1.0)
            add_score_grad(i, i, k_ii, -1.0)

    grads = model.backward_proposals(cache, d_phi)
    gw_word, gb_word, _ = linear_backward(model.word, entity_mat, d_psi)
    grads["word.weights"] = gw_word
    grads["word.bias"] = gb_word
    return float(loss), grads


# ---------------------------------------------------------------------------
# Attention/reconstruction model


class ReconModel:
    """Attention over proposals trained by reconstructing the entity embedding.

    phi and psi are single linear maps into a joint space; a linear head on
    [phi(r_k); psi(e)] gives attention logits, softmaxed over the frame's
    proposals; a final linear map must turn the attention-weighted visual
    code back into psi(e) under squared error.
    """

    def __init__(
        self,
        visual_dim: int,
        embed_dim: int,
        joint_dim: int = 100,
        rng: np.random.Generator | None = None,
    ):
        init_rng = rng if rng is not None else make_rng(0, "init")
        self.visual = LinearLayer.init(visual_dim, joint_dim, init_rng)
        self.word = LinearLayer.init(embed_dim, joint_dim, init_rng)
        self.attention = LinearLayer.init(2 * joint_dim, 1, init_rng)
        self.reconstructor = LinearLayer.init(joint_dim, joint_dim, init_rng)

    @property
    def visual_dim(self) -> int:
        return self.visual.n_in

    @property
    def embed_dim(self) -> int:
        return self.word.n_in

    @property
    def joint_dim(self) -> int:
        return self.visual.n_out

    def params(self) -> dict[str, np.ndarray]:
        return {
            "visual.weights": self.visual.weights,
            "visual.bias": self.visual.bias,
            "word.weights": self.word.weights,
            "word.bias": self.word.bias,
            "attention.weights": self.attention.weights,
            "attention.bias": self.attention.bias,
            "reconstructor.weights": self.reconstructor.weights,
            "reconstructor.bias": self.reconstructor.bias,
        }

    def save(self, sink) -> None:
        meta = {
            "model": "recon",
            "visual_dim": self.visual_dim,
            "embed_dim": self.embed_dim,
            "joint_dim": self.joint_dim,
        }
        save_checkpoint(sink, self.params(), meta)

    @classmethod
    def load(cls, source) -> "ReconModel":
        meta, tensors = load_checkpoint(source)
        if meta.get("model") != "recon":
            raise GroundingError(f"checkpoint holds a {meta.get('model')!r} model, not recon")
        model = cls.__new__(cls)
        model.visual = LinearLayer(tensors["visual.weights"], tensors["visual.bias"])
        model.word = LinearLayer(tensors["word.weights"], tensors["word.bias"])
        model.attention = LinearLayer(tensors["attention.weights"], tensors["attention.bias"])
        model.reconstructor = LinearLayer(tensors["reconstructor.weights"], tensors["reconstructor.bias"])
        return model


def _recon_forward(model: ReconModel, features: np.ndarray, entity_vec: np.ndarray):
    feats = np.atleast_2d(features)
    if feats.shape[1] != model.visual_dim:
        raise GroundingError(
            f"proposal feature dim {feats.shape[1]} does not match model dim {model.visual_dim}"
        )
    if entity_vec.shape != (model.embed_dim,):
        raise GroundingError(
            f"entity vector shape {entity_vec.shape} does not match model dim {model.embed_dim}"
        )
    phi = linear_forward(model.visual, feats)  # (K, E)
    psi = linear_forward(model.word, entity_vec)  # (E,)
    concat = np.concatenate([phi, np.tile(psi, (phi.shape[0], 1))], axis=1)  # (K, 2E)
    logits = linear_forward(model.attention, concat)[:, 0]  # (K,)
    attn = softmax(logits)
    return feats, phi, psi, concat, logits, attn


def recon_attention(
    model: ReconModel, features: np.ndarray, entity_vec: np.ndarray
) -> np.ndarray:
    """Attention weights over a frame's proposals; non-negative, sums to 1."""
    return _recon_forward(model, features, entity_vec)[5]


def recon_loss(
    model: ReconModel,
    features: np.ndarray,
    entity_vec: np.ndarray,
    freeze_target: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Reconstruction loss for one (frame, entity) pair and its gradients.

    loss = mean_d (psi(e)_d - reconstruct(sum_k a_k phi(r_k))_d)^2.  The
    entity embedding receives gradients both as attention input and as the
    reconstruction target; ``freeze_target`` drops the target-side path,
    which prevents the embedding from chasing the reconstruction.
    """
    feats, phi, psi, concat, logits, attn = _recon_forward(model, features, entity_vec)
    joint = model.joint_dim
    context = attn @ phi  # (E,)
    recon = linear_forward(model.reconstructor, context)  # (E,)
    residual = psi - recon
    loss = float(np.mean(residual * residual))

    d_recon = -2.0 * residual / joint
    gw_rec, gb_rec, d_context = linear_backward(model.reconstructor, context, d_recon)
    # context = attn @ phi: split the product rule.
    d_attn = phi @ d_context  # (K,)
    d_phi = np.outer(attn, d_context)  # (K, E)
    # softmax backward: da/dlogits applied to d_attn.
    d_logits = attn * (d_attn - float(d_attn @ attn))
    gw_att, gb_att, d_concat = linear_backward(model.attention, concat, d_logits[:, None])
    d_phi += d_concat[:, :joint]
    d_psi = d_concat[:, joint:].sum(axis=0)
    if not freeze_target:
        d_psi = d_psi + 2.0 * residual / joint
    gw_vis, gb_vis, _ = linear_backward(model.visual, feats, d_phi)
    gw_word, gb_word, _ = linear_backward(model.word, entity_vec, d_psi)
    return loss, {
        "visual.weights": gw_vis,
        "visual.bias": gb_vis,
        "word.weights": gw_word,
        "word.bias": gb_word,
        "attention.weights": gw_att,
        "attention.bias": gb_att,
        "reconstructor.weights": gw_rec,
        "reconstructor.bias": gb_rec,
    }


# ---------------------------------------------------------------------------
# Training loops


def _build_items(
    pairs: Sequence[EntityFramePair] | None,
    frames: Sequence[ProposalFrame],
    embeddings: EmbeddingTable,
) -> list[MilItem]:
    """Join pairs to frames by frame id and attach entity vectors.

    Without pairs, every frame that carries its own entity label becomes an
    item.  Missing frames or embedding words raise with names listed.
    """
    by_id: dict[str, ProposalFrame] = {}
    for frame in frames:
        if frame.frame_id in by_id:
            raise GroundingError(f"duplicate frame id {frame.frame_id!r}")
        by_id[frame.frame_id] = frame
    if pairs is None:
        labelled = [(f.entity, f) for f in frames if f.entity]
        if not labelled:
            raise GroundingError("no labelled frames to train on")
    else:
        labelled = []
        for pair in pairs:
            if pair.frame_id not in by_id:
                raise GroundingError(f"pair references unknown frame {pair.frame_id!r}")
            labelled.append((pair.entity, by_id[pair.frame_id]))
    missing = embeddings.missing_words(entity for entity, _ in labelled)
    if missing:
        raise GroundingError("entity words missing from embedding table: " + ", ".join(missing))
    vectors = {entity: embeddings.entity_vector(entity) for entity, _ in labelled}
    return [
        MilItem(entity=entity, entity_vec=vectors[entity], features=frame.feature_matrix())
        for entity, frame in labelled
    ]


def _epoch_batches(
    items: list[MilItem], order: np.ndarray, batch_size: int, need_negatives: bool
) -> list[list[int]]:
    batches = [list(order[i : i + batch_size]) for i in range(0, len(order), batch_size)]
    if need_negatives and len(batches) > 1:
        last_entities = {items[i].entity for i in batches[-1]}
        if len(last_entities) < 2:
            batches[-2].extend(batches.pop())  # a lone-entity tail has no negatives
    return batches


def train_mil(
    frames: Sequence[ProposalFrame],
    embeddings: EmbeddingTable,
    cfg: GroundingConfig,
    pairs: Sequence[EntityFramePair] | None = None,
) -> tuple[MilModel, list[float]]:
    """Train the max-margin model; returns it with per-epoch mean item loss."""
    items = _build_items(pairs, frames, embeddings)
    dims = {item.features.shape[1] for item in items}
    if len(dims) != 1:
        raise GroundingError(f"inconsistent proposal feature dims: {sorted(dims)}")
    lr = cfg.lr if cfg.lr is not None else MIL_LR
    model = MilModel(
        visual_dim=dims.pop(),
        embed_dim=embeddings.dim,
        hidden=cfg.hidden,
        joint_dim=cfg.joint_dim,
        dropout_rate=cfg.dropout,
        rng=make_rng(cfg.seed, "init"),
    )
    params = model.params()
    adam = AdamState(lr=lr)
    trace: list[float] = []
    n = len(items)
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(n)
        neg_rng = make_rng(cfg.seed, "negatives", epoch)
        drop_rng = make_rng(cfg.seed, "dropout", epoch)
        total = 0.0
        for batch in _epoch_batches(items, order, cfg.batch_size, need_negatives=True):
            batch_items = [items[i] for i in batch]
            loss, grads = mil_loss(
                model,
                batch_items,
                delta=cfg.delta,
                rng=neg_rng,
                training=True,
                dropout_rng=drop_rng,
            )
            adam_step(adam, params, grads)
            total += loss
        trace.append(total / n)
    return model, trace


def train_recon(
    frames: Sequence[ProposalFrame],
    embeddings: EmbeddingTable,
    cfg: GroundingConfig,
    pairs: Sequence[EntityFramePair] | None = None,
) -> tuple[ReconModel, list[float]]:
    """Train the attention/reconstruction model; returns it with per-epoch mean loss."""
    items = _build_items(pairs, frames, embeddings)
    dims = {item.features.shape[1] for item in items}
    if len(dims) != 1:
        raise GroundingError(f"inconsistent proposal feature dims: {sorted(dims)}")
    lr = cfg.lr if cfg.lr is not None else RECON_LR
    model = ReconModel(
        visual_dim=dims.pop(),
        embed_dim=embeddings.dim,
        joint_dim=cfg.joint_dim,
        rng=make_rng(cfg.seed, "init"),
    )
    params = model.params()
    adam = AdamState(lr=lr)
    trace: list[float] = []
    n = len(items)
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for batch in _epoch_batches(items, order, cfg.batch_size, need_negatives=False):
            loss_sum = 0.0
            grad_sum: dict[str, np.ndarray] = {}
            for i in batch:
                loss, grads = recon_loss(
                    model, items[i].features, items[i].entity_vec, freeze_target=cfg.freeze_target
                )
                loss_sum += loss
                for name, g in grads.items():
                    if name in grad_sum:
                        grad_sum[name] += g
                    else:
                        grad_sum[name] = g.copy()
            scale = 1.0 / len(batch)
            adam_step(adam, params, {k: g * scale for k, g in grad_sum.items()})
            total += loss_sum
        trace.append(total / n)
    return model, trace


# ---------------------------------------------------------------------------
# Prediction


@dataclass(frozen=True)
class GroundingPrediction:
    """The proposal a model picked for one (frame, entity) query."""

    frame_id: str
    entity: str
    box_index: int
    box: Box
    score: float


def ground(model, frame: ProposalFrame, entity: str, entity_vec: np.ndarray) -> GroundingPrediction:
    """Pick the best proposal for an entity in a frame.

    MIL takes the argmax proposal score (reported through a sigmoid, which
    preserves the argmax); recon takes the argmax attention weight.  Ties go
    to the lowest proposal index.
    """
    features = frame.feature_matrix()
    if isinstance(model, MilModel):
        confidences = sigmoid(mil_scores(model, features, entity_vec))
    elif isinstance(model, ReconModel):
        confidences = recon_attention(model, features, entity_vec)
    else:
        raise GroundingError(f"cannot ground with model of type {type(model).__name__}")
    k = int(np.argmax(confidences))
    return GroundingPrediction(
        frame_id=frame.frame_id,
        entity=entity,
        box_index=k,
        box=frame.boxes[k],
        score=float(confidences[k]),
    )


# ---------------------------------------------------------------------------
# Box metrics


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes.

    Boxes must be non-degenerate (x1 < x2, y1 < y2); disjoint or merely
    touching boxes score 0.
    """
    for box in (a, b):
        x1, y1, x2, y2 = box
        if not (x1 < x2 and y1 < y2):
            raise GroundingError(f"degenerate box {box!r}")
    width = min(a[2], b[2]) - max(a[0], b[0])
    height = min(a[3], b[3]) - max(a[1], b[1])
    if width <= 0.0 or height <= 0.0:
        return 0.0
    intersection = width * height
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return intersection / (area_a + area_b - intersection)


def _qualifies(overlap: float, threshold: float) -> bool:
    # A zero-overlap box never counts, even at threshold 0.
    return overlap > 0.0 and overlap >= threshold


@dataclass(frozen=True)
class AccuracyReport:
    """Grounding accuracy over the evaluable gold records."""

    percentage: float
    n_evaluated: int
    n_excluded: int


@dataclass(frozen=True)
class RandomBaselineReport:
    """Accuracy of uniform proposal picking, summarised over repeated trials."""

    mean: float
    stddev: float
    trials: int
    n_evaluated: int


def _eligible_gold(gold: Sequence[GoldAnnotation]) -> tuple[list[GoldAnnotation], int]:
    eligible = [g for g in gold if g.boxes]
    return eligible, len(gold) - len(eligible)


def grounding_accuracy(
    predictions: Sequence[GroundingPrediction],
    gold: Sequence[GoldAnnotation],
    threshold: float = 0.5,
) -> AccuracyReport:
    """Fraction of predictions whose box meets the IoU threshold against any gold box.

    Gold records are joined on (frame id, entity); records with no boxes
    ("nothing to label") are excluded from the denominator.  A prediction
    without a matching gold record is an error.
    """
    by_key = {(g.frame_id, g.entity): g for g in gold}
    hits = 0
    evaluated = 0
    excluded = 0
    for pred in predictions:
        key = (pred.frame_id, pred.entity)
        if key not in by_key:
            raise GroundingError(
                f"no gold annotation for frame {pred.frame_id!r}, entity {pred.entity!r}"
            )
        record = by_key[key]
        if not record.boxes:
            excluded += 1
            continue
        evaluated += 1
        if any(_qualifies(iou(pred.box, gb), threshold) for gb in record.boxes):
            hits += 1
    percentage = 100.0 * hits / evaluated if evaluated else 0.0
    return AccuracyReport(percentage=percentage, n_evaluated=evaluated, n_excluded=excluded)


def _frame_lookup(frames: Sequence[ProposalFrame]) -> dict[str, ProposalFrame]:
    by_id: dict[str, ProposalFrame] = {}
    for frame in frames:
        by_id[frame.frame_id] = frame
    return by_id


def upper_bound(
    frames: Sequence[ProposalFrame], gold: Sequence[GoldAnnotation], threshold: float = 0.5
) -> float:
    """Best accuracy any proposal picker could reach: a hit when any proposal qualifies."""
    eligible, _ = _eligible_gold(gold)
    if not eligible:
        raise GroundingError("no gold records with boxes")
    by_id = _frame_lookup(frames)
    hits = 0
    for record in eligible:
        if record.frame_id not in by_id:
            raise GroundingError(f"no proposal frame for gold frame {record.frame_id!r}")
        frame = by_id[record.frame_id]
        if any(
            _qualifies(iou(box, gb), threshold) for box in frame.boxes for gb in record.boxes
        ):
            hits += 1
    return 100.0 * hits / len(eligible)


def random_baseline(
    frames: Sequence[ProposalFrame],
    gold: Sequence[GoldAnnotation],
    threshold: float = 0.5,
    rng: np.random.Generator | None = None,
    trials: int = 100,
) -> RandomBaselineReport:
    """Accuracy of picking one proposal uniformly at random, repeated ``trials`` times.

    Reports the mean and population standard deviation of the per-trial
    accuracies.
    """
    if trials < 1:
        raise GroundingError(f"trials must be >= 1, got {trials}")
    if rng is None:
        rng = make_rng(0, "random-baseline")
    eligible, _ = _eligible_gold(gold)
    if not eligible:
        raise GroundingError("no gold records with boxes")
    by_id = _frame_lookup(frames)
    qualifying: list[np.ndarray] = []
    for record in eligible:
        if record.frame_id not in by_id:
            raise GroundingError(f"no proposal frame for gold frame {record.frame_id!r}")
        frame = by_id[record.frame_id]
        qualifying.append(
            np.asarray(
                [
                    any(_qualifies(iou(box, gb), threshold) for gb in record.boxes)
                    for box in frame.boxes
                ]
            )
        )
    accuracies = np.empty(trials)
    n = len(eligible)
    for trial in range(trials):
        hits = sum(int(q[int(rng.integers(len(q)))]) for q in qualifying)
        accuracies[trial] = 100.0 * hits / n
    return RandomBaselineReport(
        mean=float(np.mean(accuracies)),
        stddev=float(np.std(accuracies)),
        trials=trials,
        n_evaluated=n,
    )
