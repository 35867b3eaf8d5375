"""Entity/frame pair construction from time-aligned transcripts.

A transcript is scanned left to right against an entity vocabulary,
preferring two-word matches over one-word matches and consuming matched
tokens.  Every match becomes a training pair stamped with the end time of
its last word; entities below a corpus-wide frequency floor are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .ingest import CtmToken, EntityFramePair, EntityVocabulary, IngestError

# POS tags that may participate in matching when tags are present at all.
NOUN_TAGS = frozenset({"NN", "NNS"})

# Singular forms that no suffix rule recovers.
IRREGULAR_PLURALS = {
    "children": "child",
    "feet": "foot",
    "geese": "goose",
    "knives": "knife",
    "leaves": "leaf",
    "lives": "life",
    "loaves": "loaf",
    "men": "man",
    "mice": "mouse",
    "people": "person",
    "shelves": "shelf",
    "teeth": "tooth",
    "wives": "wife",
    "wolves": "wolf",
    "women": "woman",
}


class DatasetError(ValueError):
    """Raised when extraction inputs are inconsistent."""


def normalize_plural(word: str, irregular: Mapping[str, str] | None = None) -> str:
    """Map a plural surface form to its singular; other words pass through.

    Rules apply in order, first hit wins: irregular lexicon; "-ies" -> "-y"
    for words longer than 4 characters; "-es" stripped when the stem ends in
    s, x, z, ch, or sh; "-s" stripped for words longer than 3 characters not
    ending in "ss" or "us".  The rules are deliberately cheap and are applied
    once per word, not to a fixed point.
    """
    lexicon = IRREGULAR_PLURALS if irregular is None else irregular
    if word in lexicon:
        return lexicon[word]
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith("es") and word[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return word[:-2]
    if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "us")):
        return word[:-1]
    return word


def normalize_entity(entity: str, irregular: Mapping[str, str] | None = None) -> str:
    """Singularise the head (last) word of an entity string."""
    words = entity.split()
    words[-1] = normalize_plural(words[-1], irregular)
    return " ".join(words)


def load_irregular_lexicon(source) -> dict[str, str]:
    """Read "plural singular" lines; '#' comments and blank lines are skipped."""
    from .ingest import _as_text  # shared text-source handling

    lexicon: dict[str, str] = {}
    with _as_text(source) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise IngestError(
                    f"line {lineno}: expected 'plural singular', got {len(fields)} fields", lineno
                )
            lexicon[fields[0].lower()] = fields[1].lower()
    return lexicon


@dataclass
class DatasetSummary:
    """Corpus statistics after extraction and frequency filtering."""

    n_pairs: int
    n_entities: int
    n_videos: int
    frequencies: dict[str, int]
    n_surface_forms: int
    min_count: int

    def top(self, n: int) -> list[tuple[str, int]]:
        return list(self.frequencies.items())[:n]


def _group_tokens(tokens) -> dict[str, list[CtmToken]]:
    if isinstance(tokens, Mapping):
        return {vid: list(toks) for vid, toks in tokens.items()}
    grouped: dict[str, list[CtmToken]] = {}
    for tok in tokens:
        grouped.setdefault(tok.utterance_id, []).append(tok)
    return grouped


def _eligible(tok: CtmToken) -> bool:
    # Untagged transcripts match on every token; tagged ones only on nouns.
    return tok.pos is None or tok.pos in NOUN_TAGS


def frame_id_for(video_id: str, timestamp_s: float) -> str:
    """Frame naming convention: video id plus the timestamp in whole milliseconds."""
    return f"{video_id}_{round(timestamp_s * 1000)}"


def extract_entity_pairs(
    tokens,
    vocab: EntityVocabulary,
    min_count: int = 5,
    merge_plural: bool = True,
    irregular: Mapping[str, str] | None = None,
) -> tuple[list[EntityFramePair], DatasetSummary]:
    """Scan transcripts against a vocabulary and build entity/frame pairs.

    ``tokens`` is either a mapping of video id -> token list or a flat token
    iterable (grouped here by utterance id, order preserved).  At each
    position the two-word candidate is tried before the one-word candidate
    and matched tokens are consumed.  With ``merge_plural`` both vocabulary
    entries and transcript candidates are singularised (head word only)
    before comparison, so plural and singular mentions count as one entity.
    Entities with fewer than ``min_count`` matches across the whole corpus
    are dropped.  A pair's timestamp is the end time of its last matched
    token; its frame id follows :func:`frame_id_for`.

    Returns the retained pairs (transcript order) and a summary whose
    frequency table is sorted by descending count, ties alphabetically.
    """
    if min_count < 1:
        raise DatasetError(f"min_count must be >= 1, got {min_count}")
    grouped = _group_tokens(tokens)

    def canon(phrase: str) -> str:
        return normalize_entity(phrase, irregular) if merge_plural else phrase

    match_set = {canon(entry) for entry in vocab.entries}

    raw_pairs: list[tuple[EntityFramePair, str]] = []  # (pair, surface form)
    for video_id, toks in grouped.items():
        for a, b in zip(toks, toks[1:]):
            if b.start_s < a.start_s:
                raise DatasetError(
                    f"video {video_id}: tokens out of order "
                    f"({b.word!r} at {b.start_s} after {a.word!r} at {a.start_s})"
                )
        i = 0
        n = len(toks)
        while i < n:
            matched = None  # (canonical, surface, last token index)
            if i + 1 < n and _eligible(toks[i]) and _eligible(toks[i + 1]):
                surface = f"{toks[i].word} {toks[i + 1].word}"
                cand = canon(surface)
                if cand in match_set:
                    matched = (cand, surface, i + 1)
            if matched is None and _eligible(toks[i]):
                surface = toks[i].word
                cand = canon(surface)
                if cand in match_set:
                    matched = (cand, surface, i)
            if matched is None:
                i += 1
                continue
            entity, surface, last = matched
            t = toks[last].end_s
            raw_pairs.append(
                (
                    EntityFramePair(
                        entity=entity,
                        video_id=video_id,
                        timestamp_s=t,
                        frame_id=frame_id_for(video_id, t),
                    ),
                    surface,
                )
            )
            i = last + 1

    counts: dict[str, int] = {}
    surfaces: dict[str, set[str]] = {}
    for pair, surface in raw_pairs:
        counts[pair.entity] = counts.get(pair.entity, 0) + 1
        surfaces.setdefault(pair.entity, set()).add(surface)

    kept = {e for e, c in counts.items() if c >= min_count}
    pairs = [pair for pair, _ in raw_pairs if pair.entity in kept]
    frequencies = dict(sorted(((e, counts[e]) for e in kept), key=lambda kv: (-kv[1], kv[0])))
    summary = DatasetSummary(
        n_pairs=len(pairs),
        n_entities=len(kept),
        n_videos=len({p.video_id for p in pairs}),
        frequencies=frequencies,
        n_surface_forms=sum(len(surfaces[e]) for e in kept),
        min_count=min_count,
    )
    return pairs, summary


def match_phrase_to_entity(
    phrase_tokens: Sequence[str],
    vocab: EntityVocabulary,
    merge_plural: bool = True,
    irregular: Mapping[str, str] | None = None,
) -> str | None:
    """Resolve a multi-word phrase to the vocabulary entity of its last matching token.

    Tokens are singularised (when merging) and checked against the one-word
    vocabulary entries; the rightmost hit wins, None if nothing matches.
    """
    match_set = {
        normalize_entity(e, irregular) if merge_plural else e
        for e in vocab.entries
        if len(e.split()) == 1
    }
    best = None
    for tok in phrase_tokens:
        word = tok.lower()
        cand = normalize_plural(word, irregular) if merge_plural else word
        if cand in match_set:
            best = cand
    return best


def video_multilabels(pairs: Iterable[EntityFramePair]) -> dict[str, set[str]]:
    """Video id -> set of entities paired anywhere in that video."""
    labels: dict[str, set[str]] = {}
    for pair in pairs:
        labels.setdefault(pair.video_id, set()).add(pair.entity)
    return labels


def format_summary(summary: DatasetSummary, top_n: int | None = None) -> str:
    """Human-readable summary: totals plus an aligned frequency table."""
    lines = [
        f"pairs: {summary.n_pairs}",
        f"entities (merged): {summary.n_entities}",
        f"surface forms: {summary.n_surface_forms}",
        f"videos: {summary.n_videos}",
        f"min count: {summary.min_count}",
        "",
    ]
    rows = list(summary.frequencies.items())
    if top_n is not None:
        rows = rows[:top_n]
    if rows:
        width = max(len(e) for e, _ in rows)
        lines.append(f"{'rank':>4}  {'entity':<{width}}  count")
        for rank, (entity, count) in enumerate(rows, start=1):
            lines.append(f"{rank:>4}  {entity:<{width}}  {count}")
    return "\n".join(lines) + "\n"
