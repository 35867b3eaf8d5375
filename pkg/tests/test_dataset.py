import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundkit.dataset import (
    DatasetError,
    extract_entity_pairs,
    frame_id_for,
    load_irregular_lexicon,
    match_phrase_to_entity,
    normalize_entity,
    normalize_plural,
    video_multilabels,
    format_summary,
)
from groundkit.ingest import CtmToken, EntityVocabulary

from oracles import scan_oracle

# Expected singulars worked out by hand from the rule order; frozen before
# the implementation.  Several are deliberately "wrong" English (hors, maz,
# sery) because the cheap suffix rules do not know better.
PLURAL_TABLE = [
    ("hands", "hand"),
    ("balls", "ball"),
    ("cups", "cup"),
    ("eggs", "egg"),
    ("tables", "table"),
    ("shoes", "shoe"),
    ("eyes", "eye"),
    ("ties", "tie"),  # length 4: too short for the -ies rule
    ("pies", "pie"),
    ("babies", "baby"),
    ("ladies", "lady"),
    ("skies", "sky"),
    ("cities", "city"),
    ("berries", "berry"),
    ("boxes", "box"),
    ("foxes", "fox"),
    ("glasses", "glass"),
    ("kisses", "kiss"),
    ("dishes", "dish"),
    ("brushes", "brush"),
    ("churches", "church"),
    ("benches", "bench"),
    ("buses", "bus"),
    ("mazes", "maz"),  # -es after z strips both letters
    ("horses", "hors"),  # -es after s strips both letters
    ("houses", "hous"),
    ("series", "sery"),  # -ies fires first
    ("knives", "knife"),  # irregular lexicon
    ("wives", "wife"),
    ("leaves", "leaf"),
    ("shelves", "shelf"),
    ("children", "child"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "person"),
    ("geese", "goose"),
    ("virus", "virus"),  # -us never stripped
    ("cactus", "cactus"),
    ("gas", "gas"),  # too short for the -s rule
    ("bus", "bus"),
    ("its", "its"),
    ("class", "class"),  # -ss never stripped
    ("press", "press"),
    ("water", "water"),  # no suffix at all
    ("knife", "knife"),
    ("tomatoes", "tomatoe"),  # -oes is not an -es context; single -s strips
    ("potatoes", "potatoe"),
]


@pytest.mark.parametrize("plural,singular", PLURAL_TABLE)
def test_normalize_plural_table(plural, singular):
    assert normalize_plural(plural) == singular


def test_normalize_plural_applies_once_not_to_fixed_point():
    # horses -> hors in one pass; a second pass would keep chewing.
    assert normalize_plural("horses") == "hors"
    assert normalize_plural("hors") == "hor"


def test_normalize_plural_custom_lexicon():
    assert normalize_plural("oxen", {"oxen": "ox"}) == "ox"
    # A custom lexicon replaces the built-in one entirely.
    assert normalize_plural("feet", {}) == "feet"


def test_normalize_entity_touches_last_word_only():
    assert normalize_entity("tennis balls") == "tennis ball"
    assert normalize_entity("sports car") == "sports car"
    assert normalize_entity("glasses") == "glass"


def test_load_irregular_lexicon():
    text = "# plural singular\noxen ox\n\ncacti cactus\n"
    assert load_irregular_lexicon(io.StringIO(text)) == {"oxen": "ox", "cacti": "cactus"}
    with pytest.raises(Exception):
        load_irregular_lexicon(io.StringIO("just-one-field\n"))


# ---------------------------------------------------------------------------
# Extraction


def _tok(vid, i, word, pos=None):
    return CtmToken(vid, "1", 0.4 * i, 0.3, word, pos=pos)


def _vocab(*entries):
    return EntityVocabulary(frozenset(entries))


def test_bigram_preferred_over_unigram():
    tokens = [
        CtmToken("v1", "1", 1.0, 0.2, "tennis"),
        CtmToken("v1", "1", 1.2, 0.3, "ball"),
    ]
    pairs, _ = extract_entity_pairs(tokens, _vocab("tennis ball", "ball"), min_count=1)
    assert len(pairs) == 1
    assert pairs[0].entity == "tennis ball"
    assert pairs[0].timestamp_s == pytest.approx(1.5)
    assert pairs[0].frame_id == "v1_1500"


def test_matched_tokens_are_consumed():
    # After "tennis ball" matches, its "ball" cannot also match alone.
    tokens = [_tok("v", 0, "tennis"), _tok("v", 1, "ball"), _tok("v", 2, "ball")]
    pairs, _ = extract_entity_pairs(tokens, _vocab("tennis ball", "ball"), min_count=1)
    assert [p.entity for p in pairs] == ["tennis ball", "ball"]


def test_timestamp_is_end_of_last_matched_word():
    tokens = [_tok("v", 0, "knife"), _tok("v", 1, "hand")]
    pairs, _ = extract_entity_pairs(tokens, _vocab("knife", "hand"), min_count=1)
    assert pairs[0].timestamp_s == pytest.approx(0.3)
    assert pairs[1].timestamp_s == pytest.approx(0.7)
    for pair in pairs:
        assert pair.frame_id == frame_id_for(pair.video_id, pair.timestamp_s)
        assert pair.frame_id == f"{pair.video_id}_{round(pair.timestamp_s * 1000)}"


def test_min_count_filters_rare_entities():
    tokens = [_tok("v", i, "hand") for i in range(5)] + [_tok("v", 9, "knife")]
    pairs, summary = extract_entity_pairs(tokens, _vocab("hand", "knife"), min_count=5)
    assert {p.entity for p in pairs} == {"hand"}
    assert summary.n_pairs == 5
    assert summary.frequencies == {"hand": 5}
    assert summary.n_entities == 1


def test_plural_merge_pools_counts():
    tokens = [_tok("v", 0, "hand"), _tok("v", 1, "hands"), _tok("v", 2, "hands")]
    pairs, summary = extract_entity_pairs(tokens, _vocab("hand"), min_count=3)
    assert [p.entity for p in pairs] == ["hand"] * 3
    assert summary.frequencies == {"hand": 3}
    assert summary.n_surface_forms == 2  # "hand" and "hands"

    pairs, summary = extract_entity_pairs(
        tokens, _vocab("hand"), min_count=3, merge_plural=False
    )
    assert pairs == []  # unmerged: hand x1, hands x2, both below the floor


def test_merging_never_increases_entity_count():
    tokens = [_tok("v", i, w) for i, w in enumerate(["hand", "hands", "knife", "knives"])]
    vocab = _vocab("hand", "hands", "knife", "knives")
    _, merged = extract_entity_pairs(tokens, vocab, min_count=1)
    _, unmerged = extract_entity_pairs(tokens, vocab, min_count=1, merge_plural=False)
    assert merged.n_entities <= unmerged.n_entities
    assert merged.n_entities == 2
    assert unmerged.n_entities == 4


def test_pos_tags_restrict_matching():
    tokens = [
        _tok("v", 0, "hand", pos="VB"),  # "hand me that" — verb, not a mention
        _tok("v", 1, "hand", pos="NN"),
        _tok("v", 2, "hands", pos="NNS"),
    ]
    pairs, _ = extract_entity_pairs(tokens, _vocab("hand"), min_count=1)
    assert len(pairs) == 2


def test_pos_tags_gate_bigrams_too():
    tokens = [_tok("v", 0, "tennis", pos="VB"), _tok("v", 1, "ball", pos="NN")]
    pairs, _ = extract_entity_pairs(tokens, _vocab("tennis ball", "ball"), min_count=1)
    assert [p.entity for p in pairs] == ["ball"]


def test_unsorted_tokens_rejected():
    tokens = [_tok("v", 3, "hand"), _tok("v", 0, "knife")]
    with pytest.raises(DatasetError) as err:
        extract_entity_pairs(tokens, _vocab("hand"), min_count=1)
    assert "out of order" in str(err.value)


def test_extraction_accepts_grouped_mapping():
    grouped = {
        "v2": [_tok("v2", 0, "hand")],
        "v1": [_tok("v1", 0, "hand")],
    }
    pairs, _ = extract_entity_pairs(grouped, _vocab("hand"), min_count=1)
    # Mapping order is preserved, not re-sorted.
    assert [p.video_id for p in pairs] == ["v2", "v1"]


def test_extraction_is_deterministic():
    tokens = [_tok("v", i, w) for i, w in enumerate(["hand", "knife", "hands", "ball"])]
    vocab = _vocab("hand", "knife", "ball")
    first = extract_entity_pairs(tokens, vocab, min_count=1)
    second = extract_entity_pairs(tokens, vocab, min_count=1)
    assert first[0] == second[0]
    assert first[1].frequencies == second[1].frequencies


def test_summary_sorted_by_count_then_name():
    tokens = (
        [_tok("a", i, "knife") for i in range(3)]
        + [_tok("b", i, "hand") for i in range(3)]
        + [_tok("c", i, "ball") for i in range(99, 100)]
    )
    _, summary = extract_entity_pairs(tokens, _vocab("hand", "knife", "ball"), min_count=1)
    assert list(summary.frequencies) == ["hand", "knife", "ball"]
    assert summary.top(2) == [("hand", 3), ("knife", 3)]
    text = format_summary(summary)
    assert "hand" in text and "rank" in text


_WORDS = ["cat", "cats", "dog", "box", "boxes", "pan", "the", "hot"]
_ENTRIES = ["cat", "dog", "box", "hot dog", "cat box", "pan"]


@settings(max_examples=200, deadline=None)
@given(
    words=st.lists(st.sampled_from(_WORDS), max_size=12),
    entries=st.sets(st.sampled_from(_ENTRIES), min_size=1),
    merge=st.booleans(),
)
def test_greedy_scan_matches_reference(words, entries, merge):
    tokens = [_tok("v", i, w) for i, w in enumerate(words)]
    vocab = EntityVocabulary(frozenset(entries))
    pairs, _ = extract_entity_pairs(tokens, vocab, min_count=1, merge_plural=merge)

    canon = (lambda s: normalize_entity(s)) if merge else (lambda s: s)
    match_set = {canon(e) for e in entries}
    expected = scan_oracle(words, [True] * len(words), match_set, canon)
    assert [(p.entity, p.timestamp_s) for p in pairs] == [
        (entity, tokens[last].end_s) for entity, last in expected
    ]


# ---------------------------------------------------------------------------
# Phrase matching and label pooling


def test_match_phrase_takes_last_vocabulary_hit():
    vocab = _vocab("corner", "street")
    assert match_phrase_to_entity(["a", "street", "corner"], vocab) == "corner"
    assert match_phrase_to_entity(["corner", "of", "street"], vocab) == "street"
    assert match_phrase_to_entity(["nothing", "here"], vocab) is None


def test_match_phrase_normalizes_plurals():
    vocab = _vocab("knife")
    assert match_phrase_to_entity(["two", "knives"], vocab) == "knife"
    assert match_phrase_to_entity(["two", "knives"], vocab, merge_plural=False) is None


def test_video_multilabels_pools_by_video():
    tokens = [
        _tok("v1", 0, "hand"),
        _tok("v1", 1, "knife"),
        _tok("v1", 2, "hand"),
        _tok("v2", 0, "knife"),
    ]
    pairs, _ = extract_entity_pairs(tokens, _vocab("hand", "knife"), min_count=1)
    labels = video_multilabels(pairs)
    assert labels == {"v1": {"hand", "knife"}, "v2": {"knife"}}
