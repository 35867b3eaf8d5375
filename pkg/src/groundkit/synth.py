"""Synthetic corpora with known structure for end-to-end checks.

Grounding corpora plant, in every frame, exactly one proposal whose feature
comes from its entity's visual cluster; the remaining proposals draw from
background clusters that no entity embedding points at.  Boxes are disjoint
grid tiles and the gold box equals the planted proposal's tile, so exactly
one proposal per frame qualifies at any threshold: the proposal upper bound
is 100, the expected random baseline is 100/K, and with zero noise a linear
model separates planted from background perfectly.

This module computes its own geometry on purpose — it must stay usable as
an independent cross-check of the production metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import frame_id_for
from .ingest import (
    EmbeddingTable,
    EntityFramePair,
    EntityVocabulary,
    FrameVector,
    GoldAnnotation,
    Proposal,
    ProposalFrame,
)
from .nn import make_rng

FEATURE_SCALE = 4.0  # length of every planted/background cluster center
CENTER_SCALE = 10.0  # length of classification class centers
TILE_SIZE = 100.0
TILE_GAP = 10.0


class SynthError(ValueError):
    """Raised for inconsistent generator settings."""


@dataclass(frozen=True)
class SynthSpec:
    """Knobs for corpus generation; the same seed always yields the same corpus."""

    n_entities: int = 20
    frames_per_entity: int = 100
    proposals_per_frame: int = 10
    visual_dim: int = 64
    embed_dim: int = 100
    frame_dim: int = 64
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_entities < 2:
            raise SynthError("need at least 2 entities")
        if self.frames_per_entity < 1 or self.proposals_per_frame < 1:
            raise SynthError("frames_per_entity and proposals_per_frame must be >= 1")
        if min(self.visual_dim, self.embed_dim, self.frame_dim) < 1:
            raise SynthError("dims must be positive")
        if self.noise_sigma < 0:
            raise SynthError("noise_sigma must be >= 0")


@dataclass
class GroundingCorpus:
    frames: list[ProposalFrame]
    gold: list[GoldAnnotation]
    pairs: list[EntityFramePair]
    embeddings: EmbeddingTable
    vocabulary: EntityVocabulary
    # The planted geometry, exposed so callers can build analytic models
    # against the corpus: row i of entity_centers is entity i's visual
    # cluster center; background_centers hold the distractor clusters.
    entity_centers: np.ndarray = None
    background_centers: np.ndarray = None


@dataclass
class ClassificationCorpus:
    frames: list[FrameVector]
    pairs: list[EntityFramePair]
    video_labels: dict[str, set[str]]
    class_index: list[str]


def entity_names(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"obj{i:0{width}d}" for i in range(n)]


def _directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, dim) unit rows; mutually orthogonal whenever dim allows it."""
    gauss = rng.standard_normal((dim, count))
    if dim >= count:
        q, _ = np.linalg.qr(gauss)
        return q.T
    return gauss.T / np.linalg.norm(gauss, axis=0)[:, None]


def _tiles(count: int) -> list[tuple[float, float, float, float]]:
    # Disjoint tiles in a row: no pair of distinct proposal boxes overlaps.
    step = TILE_SIZE + TILE_GAP
    return [(k * step, 0.0, k * step + TILE_SIZE, TILE_SIZE) for k in range(count)]


def gen_grounding_corpus(spec: SynthSpec) -> GroundingCorpus:
    """Planted-proposal corpus: frames, gold tiles, pairs, embeddings, vocabulary.

    Entity embeddings are distinct basis vectors of the embedding space
    (plus per-entity Gaussian noise scaled by ``noise_sigma``), which needs
    ``embed_dim >= n_entities``.  Proposal features are cluster centers plus
    per-proposal noise; distractor slots draw from background clusters.
    """
    if spec.embed_dim < spec.n_entities:
        raise SynthError(
            f"embed_dim {spec.embed_dim} < n_entities {spec.n_entities}: "
            "basis-vector embeddings need one dimension per entity"
        )
    names = entity_names(spec.n_entities)
    k = spec.proposals_per_frame
    n_background = max(k - 1, 1)

    master = make_rng(spec.seed, "grounding-clusters")
    centers = FEATURE_SCALE * _directions(spec.visual_dim, spec.n_entities + n_background, master)
    entity_centers = centers[: spec.n_entities]
    background_centers = centers[spec.n_entities :]

    vectors: dict[str, np.ndarray] = {}
    emb_rng = make_rng(spec.seed, "grounding-embeddings")
    for i, name in enumerate(names):
        base = np.zeros(spec.embed_dim)
        base[i] = 1.0
        vectors[name] = base + spec.noise_sigma * emb_rng.standard_normal(spec.embed_dim)
    embeddings = EmbeddingTable(dim=spec.embed_dim, vectors=vectors)

    tiles = _tiles(k)
    frames: list[ProposalFrame] = []
    gold: list[GoldAnnotation] = []
    pairs: list[EntityFramePair] = []
    for i, name in enumerate(names):
        rng = make_rng(spec.seed, "grounding-entity", i)
        video_id = f"{name}_vid"
        for j in range(spec.frames_per_entity):
            planted_slot = int(rng.integers(k))
            proposals = []
            for slot in range(k):
                if slot == planted_slot:
                    center = entity_centers[i]
                else:
                    center = background_centers[int(rng.integers(n_background))]
                feature = center + spec.noise_sigma * rng.standard_normal(spec.visual_dim)
                proposals.append(Proposal(box=tiles[slot], feature=feature))
            timestamp = float(j + 1)
            frame_id = frame_id_for(video_id, timestamp)
            frames.append(
                ProposalFrame(
                    frame_id=frame_id, video_id=video_id, proposals=proposals, entity=name
                )
            )
            gold.append(GoldAnnotation(frame_id=frame_id, entity=name, boxes=(tiles[planted_slot],)))
            pairs.append(
                EntityFramePair(
                    entity=name, video_id=video_id, timestamp_s=timestamp, frame_id=frame_id
                )
            )
    vocabulary = EntityVocabulary(frozenset(names))
    return GroundingCorpus(
        frames=frames,
        gold=gold,
        pairs=pairs,
        embeddings=embeddings,
        vocabulary=vocabulary,
        entity_centers=entity_centers,
        background_centers=background_centers,
    )


def gen_classification_corpus(
    spec: SynthSpec, centers: np.ndarray | None = None
) -> ClassificationCorpus:
    """Frame-vector corpus with one video per entity and Gaussian class clusters.

    Default centers are mutually orthogonal directions of length
    ``CENTER_SCALE`` (requires ``frame_dim >= n_entities``), so classes stay
    linearly separable whenever ``noise_sigma`` is well below the
    inter-center distance ``CENTER_SCALE * sqrt(2)``.  Pass explicit
    ``centers`` (n_entities, frame_dim) to control the geometry.
    """
    names = entity_names(spec.n_entities)
    if centers is None:
        if spec.frame_dim < spec.n_entities:
            raise SynthError(
                f"frame_dim {spec.frame_dim} < n_entities {spec.n_entities}: "
                "orthogonal class centers need one dimension per class"
            )
        master = make_rng(spec.seed, "classification-centers")
        centers = CENTER_SCALE * _directions(spec.frame_dim, spec.n_entities, master)
    else:
        centers = np.asarray(centers, dtype=np.float64)
        if centers.shape != (spec.n_entities, spec.frame_dim):
            raise SynthError(
                f"centers shape {centers.shape} != ({spec.n_entities}, {spec.frame_dim})"
            )

    frames: list[FrameVector] = []
    pairs: list[EntityFramePair] = []
    video_labels: dict[str, set[str]] = {}
    for i, name in enumerate(names):
        rng = make_rng(spec.seed, "classification-entity", i)
        video_id = f"{name}_vid"
        video_labels[video_id] = {name}
        for j in range(spec.frames_per_entity):
            feature = centers[i] + spec.noise_sigma * rng.standard_normal(spec.frame_dim)
            timestamp = float(j + 1)
            frame_id = frame_id_for(video_id, timestamp)
            frames.append(
                FrameVector(frame_id=frame_id, video_id=video_id, feature=feature, entity=name)
            )
            pairs.append(
                EntityFramePair(
                    entity=name, video_id=video_id, timestamp_s=timestamp, frame_id=frame_id
                )
            )
    return ClassificationCorpus(
        frames=frames, pairs=pairs, video_labels=video_labels, class_index=names
    )


def oracle_upper_bound(
    frames: Sequence[ProposalFrame], gold: Sequence[GoldAnnotation], threshold: float = 0.5
) -> float:
    """Proposal upper bound recomputed the slow, obvious way.

    Exhaustive double loop with its own overlap arithmetic; kept free of the
    production metric code so the two can check each other.
    """
    by_id = {}
    for frame in frames:
        by_id[frame.frame_id] = frame
    evaluated = 0
    hits = 0
    for record in gold:
        if len(record.boxes) == 0:
            continue
        evaluated += 1
        frame = by_id[record.frame_id]
        found = False
        for proposal in frame.proposals:
            px1, py1, px2, py2 = proposal.box
            for gx1, gy1, gx2, gy2 in record.boxes:
                overlap_x = min(px2, gx2) - max(px1, gx1)
                overlap_y = min(py2, gy2) - max(py1, gy1)
                if overlap_x <= 0 or overlap_y <= 0:
                    continue
                inter = overlap_x * overlap_y
                union = (px2 - px1) * (py2 - py1) + (gx2 - gx1) * (gy2 - gy1) - inter
                ratio = inter / union
                if ratio > 0 and ratio >= threshold:
                    found = True
        if found:
            hits += 1
    if evaluated == 0:
        raise SynthError("no gold records with boxes")
    return 100.0 * hits / evaluated
