"""Readers and writers for every on-disk format the toolkit touches.

Text formats only: CTM transcripts, word2vec-style embedding tables,
newline-delimited vocabularies, and JSON-lines files for proposal frames,
frame vectors, gold box annotations, and entity/frame pairs.  JSON floats
are serialised with ``repr`` so every float64 survives a write/read
round trip bit-for-bit.
"""

from __future__ import annotations

import contextlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

# Feature widths used throughout unless a file header says otherwise.
DEFAULT_PROPOSAL_DIM = 2048
DEFAULT_FRAME_DIM = 4096
DEFAULT_EMBED_DIM = 100

_CTM_COMMENT = (";;", "#")

Box = tuple[float, float, float, float]


class IngestError(ValueError):
    """An input file violates its format contract."""

    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(message)
        self.lineno = lineno


class MissingWordError(KeyError):
    """A lookup word is absent from an embedding table."""

    def __init__(self, words: Sequence[str]):
        self.words = list(words)
        super().__init__("words missing from embedding table: " + ", ".join(self.words))

    def __str__(self) -> str:
        return "words missing from embedding table: " + ", ".join(self.words)


@contextlib.contextmanager
def _as_text(source, mode: str = "r") -> Iterator:
    """Yield a text file object for a path, text stream, or binary stream."""
    if isinstance(source, (str, Path)):
        handle = open(source, mode, encoding="utf-8", newline="")
        try:
            yield handle
        finally:
            handle.close()
    elif isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        wrapper = io.TextIOWrapper(source, encoding="utf-8")
        try:
            yield wrapper
        finally:
            wrapper.detach()
    else:
        yield source


def _validate_box(box: Sequence[float], context: str) -> Box:
    if len(box) != 4:
        raise IngestError(f"{context}: box must have 4 coordinates, got {len(box)}")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not all(np.isfinite(v) for v in (x1, y1, x2, y2)):
        raise IngestError(f"{context}: box coordinates must be finite")
    if not (x1 < x2 and y1 < y2):
        raise IngestError(f"{context}: degenerate box {(x1, y1, x2, y2)!r} (need x1 < x2 and y1 < y2)")
    return (x1, y1, x2, y2)


def _float_list(values, context: str) -> np.ndarray:
    try:
        arr = np.asarray([float(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise IngestError(f"{context}: non-numeric value ({exc})") from None
    if not np.all(np.isfinite(arr)):
        raise IngestError(f"{context}: non-finite value")
    return arr


# ---------------------------------------------------------------------------
# CTM transcripts


@dataclass(frozen=True)
class CtmToken:
    """One time-aligned word: utterance/video id, start and duration in seconds."""

    utterance_id: str
    channel: str
    start_s: float
    dur_s: float
    word: str
    confidence: float | None = None
    pos: str | None = None

    def __post_init__(self):
        if not self.utterance_id:
            raise IngestError("empty utterance id")
        if not self.word or any(c.isspace() for c in self.word):
            raise IngestError(f"invalid word {self.word!r}")
        if self.start_s < 0:
            raise IngestError(f"negative start time {self.start_s}")
        if self.dur_s <= 0:
            raise IngestError(f"non-positive duration {self.dur_s}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise IngestError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def end_s(self) -> float:
        return self.start_s + self.dur_s


def _parse_number(raw: str, lineno: int, what: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise IngestError(f"line {lineno}: non-numeric {what} {raw!r}", lineno) from None
    if not np.isfinite(value):
        raise IngestError(f"line {lineno}: non-finite {what} {raw!r}", lineno)
    return value


def parse_ctm(source) -> list[CtmToken]:
    """Parse a CTM transcript into tokens, in file order.

    Each non-comment line has 5-7 whitespace-separated columns:
    utterance id, channel, start seconds, duration seconds, word,
    then optionally a confidence in [0, 1] and a POS tag.  Words are
    lowercased here so every later stage sees one casing.
    """
    tokens: list[CtmToken] = []
    with _as_text(source) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith(_CTM_COMMENT):
                continue
            fields = line.split()
            if not 5 <= len(fields) <= 7:
                raise IngestError(
                    f"line {lineno}: expected 5-7 columns, got {len(fields)}", lineno
                )
            start = _parse_number(fields[2], lineno, "start time")
            dur = _parse_number(fields[3], lineno, "duration")
            confidence = None
            if len(fields) >= 6:
                confidence = _parse_number(fields[5], lineno, "confidence")
            pos = fields[6].upper() if len(fields) == 7 else None
            try:
                tokens.append(
                    CtmToken(
                        utterance_id=fields[0],
                        channel=fields[1],
                        start_s=start,
                        dur_s=dur,
                        word=fields[4].lower(),
                        confidence=confidence,
                        pos=pos,
                    )
                )
            except IngestError as exc:
                raise IngestError(f"line {lineno}: {exc}", lineno) from None
    return tokens


# ---------------------------------------------------------------------------
# Embedding tables (word2vec text format)


@dataclass
class EmbeddingTable:
    """Word -> float64 vector map with a fixed dimensionality."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    n_duplicates: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise IngestError(f"embedding dim must be positive, got {self.dim}")
        for word, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise IngestError(
                    f"vector for {word!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, word: str) -> np.ndarray:
        if word not in self.vectors:
            raise MissingWordError([word])
        return self.vectors[word]

    def entity_vector(self, entity: str) -> np.ndarray:
        """Vector for an entity string: the mean of its words' vectors.

        Raises MissingWordError listing every absent word.
        """
        words = entity.split()
        missing = [w for w in words if w not in self.vectors]
        if missing:
            raise MissingWordError(missing)
        return np.mean([self.vectors[w] for w in words], axis=0)

    def missing_words(self, entities: Iterable[str]) -> list[str]:
        """Sorted list of words (across all entities) absent from the table."""
        missing = {w for e in entities for w in e.split() if w not in self.vectors}
        return sorted(missing)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.vectors.keys() == other.vectors.keys()
            and all(np.array_equal(v, other.vectors[w]) for w, v in self.vectors.items())
        )


def parse_embeddings(source) -> EmbeddingTable:
    """Parse a word2vec-style text table: header "N D", then one word + D floats per line.

    Duplicate words keep the last occurrence; the count of overwritten
    entries is reported on the returned table.
    """
    with _as_text(source) as handle:
        lines = iter(enumerate(handle, start=1))
        header = None
        for lineno, raw in lines:
            if raw.strip():
                header = (lineno, raw.split())
                break
        if header is None:
            raise IngestError("empty embedding file (missing 'N D' header)")
        lineno, fields = header
        if len(fields) != 2:
            raise IngestError(f"line {lineno}: header must be 'N D', got {len(fields)} fields", lineno)
        try:
            count, dim = int(fields[0]), int(fields[1])
        except ValueError:
            raise IngestError(f"line {lineno}: non-integer header fields", lineno) from None
        if count < 0 or dim < 1:
            raise IngestError(f"line {lineno}: bad header N={count} D={dim}", lineno)

        vectors: dict[str, np.ndarray] = {}
        n_rows = 0
        n_duplicates = 0
        for lineno, raw in lines:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise IngestError(
                    f"line {lineno}: expected word + {dim} values, got {len(fields) - 1}",
                    lineno,
                )
            word = fields[0]
            try:
                vec = _float_list(fields[1:], f"line {lineno}")
            except IngestError as exc:
                raise IngestError(str(exc), lineno) from None
            n_rows += 1
            if word in vectors:
                n_duplicates += 1
            vectors[word] = vec
        if n_rows != count:
            raise IngestError(f"header declares {count} rows but file has {n_rows}")
    return EmbeddingTable(dim=dim, vectors=vectors, n_duplicates=n_duplicates)


def write_embeddings(table: EmbeddingTable, sink) -> None:
    with _as_text(sink, "w") as handle:
        handle.write(f"{len(table.vectors)} {table.dim}\n")
        for word, vec in table.vectors.items():
            handle.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# ---------------------------------------------------------------------------
# Entity vocabularies


@dataclass(frozen=True)
class EntityVocabulary:
    """Set of entity strings, each one or two lowercase words."""

    entries: frozenset[str]

    def __post_init__(self):
        for entry in self.entries:
            n_words = len(entry.split())
            if n_words not in (1, 2):
                raise IngestError(f"entity {entry!r} has {n_words} words (only 1 or 2 allowed)")

    def __contains__(self, entity: str) -> bool:
        return entity in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.entries))


def parse_vocabulary(source) -> EntityVocabulary:
    """Parse a newline-delimited vocabulary; entries are lowercased and deduplicated."""
    entries: set[str] = set()
    with _as_text(source) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip().lower()
            if not line:
                continue
            words = line.split()
            if len(words) > 2:
                raise IngestError(
                    f"line {lineno}: entity {line!r} has {len(words)} words (max 2)", lineno
                )
            entries.add(" ".join(words))
    return EntityVocabulary(frozenset(entries))


def write_vocabulary(vocab: EntityVocabulary, sink) -> None:
    with _as_text(sink, "w") as handle:
        for entry in sorted(vocab.entries):
            handle.write(entry + "\n")


# ---------------------------------------------------------------------------
# JSON-lines records


def _dump(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), ensure_ascii=False)


def _parse_json_line(line: str, context: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{context}: invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise IngestError(f"{context}: expected a JSON object")
    return record


def _require(record: dict, key: str, context: str):
    if key not in record or record[key] is None:
        raise IngestError(f"{context}: missing field {key!r}")
    return record[key]


@dataclass
class Proposal:
    """One region proposal: pixel box plus its feature vector."""

    box: Box
    feature: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Proposal):
            return NotImplemented
        return self.box == other.box and np.array_equal(self.feature, other.feature)


@dataclass
class ProposalFrame:
    """A sampled video frame with K >= 1 region proposals.

    ``entity`` is the weak label attached by pair extraction; it is absent
    on frames used purely for inference.
    """

    frame_id: str
    video_id: str
    proposals: list[Proposal]
    entity: str | None = None

    def __post_init__(self):
        if not self.proposals:
            raise IngestError(f"frame {self.frame_id!r} has no proposals")

    @property
    def boxes(self) -> list[Box]:
        return [p.box for p in self.proposals]

    def feature_matrix(self) -> np.ndarray:
        """(K, D_v) array of proposal features."""
        return np.stack([p.feature for p in self.proposals])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProposalFrame):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.video_id == other.video_id
            and self.entity == other.entity
            and self.proposals == other.proposals
        )


@dataclass
class FrameVector:
    """A sampled video frame represented by one whole-image feature vector."""

    frame_id: str
    video_id: str
    feature: np.ndarray
    entity: str | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameVector):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.video_id == other.video_id
            and self.entity == other.entity
            and np.array_equal(self.feature, other.feature)
        )


@dataclass(frozen=True)
class GoldAnnotation:
    """Manual boxes for one entity in one frame; empty ``boxes`` marks 'nothing to label'."""

    frame_id: str
    entity: str
    boxes: tuple[Box, ...]


@dataclass(frozen=True)
class EntityFramePair:
    """One weak training example: an entity mention aligned to a video frame."""

    entity: str
    video_id: str
    timestamp_s: float
    frame_id: str


def _read_header(handle, expected_kind: str) -> tuple[dict, int]:
    first = handle.readline()
    if not first.strip():
        raise IngestError(f"missing header line (expected kind {expected_kind!r})")
    header = _parse_json_line(first, "header")
    if header.get("kind") != expected_kind:
        raise IngestError(f"header kind is {header.get('kind')!r}, expected {expected_kind!r}")
    dim = header.get("feature_dim")
    if not isinstance(dim, int) or dim < 1:
        raise IngestError(f"header feature_dim must be a positive integer, got {dim!r}")
    return header, dim


def read_proposal_frames(source) -> list[ProposalFrame]:
    """Read a proposal-frame file: a kind/feature_dim header, then one frame per line."""
    frames: list[ProposalFrame] = []
    with _as_text(source) as handle:
        _, dim = _read_header(handle, "proposal_frames")
        for idx, raw in enumerate(_records(handle), start=1):
            ctx = f"record {idx}"
            record = _parse_json_line(raw, ctx)
            frame_id = _require(record, "frame_id", ctx)
            ctx = f"record {idx} (frame {frame_id})"
            video_id = _require(record, "video_id", ctx)
            raw_props = _require(record, "proposals", ctx)
            if not isinstance(raw_props, list) or not raw_props:
                raise IngestError(f"{ctx}: proposals must be a non-empty list")
            proposals = []
            for k, rp in enumerate(raw_props):
                if not isinstance(rp, dict):
                    raise IngestError(f"{ctx}: proposal {k} is not an object")
                box = _validate_box(_require(rp, "box", f"{ctx}, proposal {k}"), f"{ctx}, proposal {k}")
                feature = _float_list(_require(rp, "feature", f"{ctx}, proposal {k}"), f"{ctx}, proposal {k}")
                if feature.shape != (dim,):
                    raise IngestError(
                        f"{ctx}, proposal {k}: feature has {feature.size} values, header says {dim}"
                    )
                proposals.append(Proposal(box=box, feature=feature))
            frames.append(
                ProposalFrame(
                    frame_id=str(frame_id),
                    video_id=str(video_id),
                    proposals=proposals,
                    entity=record.get("entity"),
                )
            )
    return frames


def _records(handle) -> Iterator[str]:
    for raw in handle:
        if raw.strip():
            yield raw


def write_proposal_frames(frames: Sequence[ProposalFrame], sink, feature_dim: int | None = None) -> None:
    if feature_dim is None:
        if not frames:
            raise IngestError("cannot infer feature_dim from an empty frame list")
        feature_dim = frames[0].proposals[0].feature.size
    with _as_text(sink, "w") as handle:
        handle.write(_dump({"kind": "proposal_frames", "feature_dim": int(feature_dim)}) + "\n")
        for frame in frames:
            props = []
            for p in frame.proposals:
                if p.feature.size != feature_dim:
                    raise IngestError(
                        f"frame {frame.frame_id!r}: feature dim {p.feature.size} != {feature_dim}"
                    )
                props.append({"box": list(p.box), "feature": [float(v) for v in p.feature]})
            record = {
                "frame_id": frame.frame_id,
                "video_id": frame.video_id,
                "entity": frame.entity,
                "proposals": props,
            }
            handle.write(_dump(record) + "\n")


def read_frame_vectors(source) -> list[FrameVector]:
    """Read a frame-vector file: a kind/feature_dim header, then one frame per line."""
    frames: list[FrameVector] = []
    with _as_text(source) as handle:
        _, dim = _read_header(handle, "frame_vectors")
        for idx, raw in enumerate(_records(handle), start=1):
            ctx = f"record {idx}"
            record = _parse_json_line(raw, ctx)
            frame_id = _require(record, "frame_id", ctx)
            ctx = f"record {idx} (frame {frame_id})"
            feature = _float_list(_require(record, "feature", ctx), ctx)
            if feature.shape != (dim,):
                raise IngestError(f"{ctx}: feature has {feature.size} values, header says {dim}")
            frames.append(
                FrameVector(
                    frame_id=str(frame_id),
                    video_id=str(_require(record, "video_id", ctx)),
                    feature=feature,
                    entity=record.get("entity"),
                )
            )
    return frames


def write_frame_vectors(frames: Sequence[FrameVector], sink, feature_dim: int | None = None) -> None:
    if feature_dim is None:
        if not frames:
            raise IngestError("cannot infer feature_dim from an empty frame list")
        feature_dim = frames[0].feature.size
    with _as_text(sink, "w") as handle:
        handle.write(_dump({"kind": "frame_vectors", "feature_dim": int(feature_dim)}) + "\n")
        for frame in frames:
            if frame.feature.size != feature_dim:
                raise IngestError(
                    f"frame {frame.frame_id!r}: feature dim {frame.feature.size} != {feature_dim}"
                )
            record = {
                "frame_id": frame.frame_id,
                "video_id": frame.video_id,
                "entity": frame.entity,
                "feature": [float(v) for v in frame.feature],
            }
            handle.write(_dump(record) + "\n")


def read_gold(source) -> list[GoldAnnotation]:
    """Read gold annotations: one headerless JSON object per line."""
    records: list[GoldAnnotation] = []
    with _as_text(source) as handle:
        for idx, raw in enumerate(_records(handle), start=1):
            ctx = f"record {idx}"
            record = _parse_json_line(raw, ctx)
            frame_id = _require(record, "frame_id", ctx)
            entity = _require(record, "entity", ctx)
            boxes = record.get("boxes")
            if boxes is None or not isinstance(boxes, list):
                raise IngestError(f"{ctx}: boxes must be a list (may be empty)")
            validated = tuple(
                _validate_box(b, f"{ctx} (frame {frame_id}), box {k}") for k, b in enumerate(boxes)
            )
            records.append(GoldAnnotation(frame_id=str(frame_id), entity=str(entity), boxes=validated))
    return records


def write_gold(records: Sequence[GoldAnnotation], sink) -> None:
    with _as_text(sink, "w") as handle:
        for rec in records:
            handle.write(
                _dump(
                    {
                        "frame_id": rec.frame_id,
                        "entity": rec.entity,
                        "boxes": [list(b) for b in rec.boxes],
                    }
                )
                + "\n"
            )


def read_pairs(source) -> list[EntityFramePair]:
    """Read entity/frame pairs: one headerless JSON object per line."""
    pairs: list[EntityFramePair] = []
    with _as_text(source) as handle:
        for idx, raw in enumerate(_records(handle), start=1):
            ctx = f"record {idx}"
            record = _parse_json_line(raw, ctx)
            pairs.append(
                EntityFramePair(
                    entity=str(_require(record, "entity", ctx)),
                    video_id=str(_require(record, "video_id", ctx)),
                    timestamp_s=float(_require(record, "timestamp_s", ctx)),
                    frame_id=str(_require(record, "frame_id", ctx)),
                )
            )
    return pairs


def write_pairs(pairs: Sequence[EntityFramePair], sink) -> None:
    with _as_text(sink, "w") as handle:
        for pair in pairs:
            handle.write(
                _dump(
                    {
                        "entity": pair.entity,
                        "video_id": pair.video_id,
                        "timestamp_s": pair.timestamp_s,
                        "frame_id": pair.frame_id,
                    }
                )
                + "\n"
            )
