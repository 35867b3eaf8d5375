import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundkit.ingest import (
    CtmToken,
    EmbeddingTable,
    EntityVocabulary,
    FrameVector,
    GoldAnnotation,
    EntityFramePair,
    IngestError,
    MissingWordError,
    Proposal,
    ProposalFrame,
    parse_ctm,
    parse_embeddings,
    parse_vocabulary,
    read_frame_vectors,
    read_gold,
    read_pairs,
    read_proposal_frames,
    write_embeddings,
    write_frame_vectors,
    write_gold,
    write_pairs,
    write_proposal_frames,
    write_vocabulary,
)

# ---------------------------------------------------------------------------
# CTM


def test_parse_ctm_five_columns():
    text = "vid1 1 0.50 0.30 Hand\nvid1 1 0.90 0.20 ball\n"
    tokens = parse_ctm(io.StringIO(text))
    assert len(tokens) == 2
    assert tokens[0] == CtmToken("vid1", "1", 0.5, 0.3, "hand")
    assert tokens[0].word == "hand"  # lowercased on ingest
    assert tokens[0].end_s == pytest.approx(0.8)


def test_parse_ctm_optional_columns():
    text = "vid1 1 0.5 0.3 hand 0.95\nvid1 1 0.9 0.2 ball 0.80 nn\n"
    tokens = parse_ctm(io.StringIO(text))
    assert tokens[0].confidence == 0.95
    assert tokens[0].pos is None
    assert tokens[1].pos == "NN"


def test_parse_ctm_skips_comments_and_blanks():
    text = ";; header comment\n\n# another\nvid1 1 0.5 0.3 hand\n"
    assert len(parse_ctm(io.StringIO(text))) == 1


def test_parse_ctm_preserves_order():
    text = "".join(f"v 1 {i}.0 0.5 w{i}\n" for i in range(10))
    tokens = parse_ctm(io.StringIO(text))
    assert [t.word for t in tokens] == [f"w{i}" for i in range(10)]


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("vid1 1 x 0.30 hand", "start time"),
        ("vid1 1 0.5 nope hand", "duration"),
        ("vid1 1 0.5 0.0 hand", "duration"),
        ("vid1 1 -0.5 0.3 hand", "start"),
        ("vid1 1 0.5 0.3 hand 1.5", "confidence"),
        ("vid1 1 0.5 0.3", "columns"),
        ("a b c d e f g h", "columns"),
    ],
)
def test_parse_ctm_errors_name_the_line(line, fragment):
    with pytest.raises(IngestError) as err:
        parse_ctm(io.StringIO(line + "\n"))
    assert "line 1" in str(err.value)
    assert fragment in str(err.value)
    assert err.value.lineno == 1


def test_ctm_token_validation():
    with pytest.raises(IngestError):
        CtmToken("v", "1", 0.0, 0.5, "two words")
    with pytest.raises(IngestError):
        CtmToken("v", "1", 0.0, 0.5, "")


# ---------------------------------------------------------------------------
# Embeddings


def test_parse_embeddings_round_trip():
    text = "2 3\nhand 0.1 -0.25 3.0\nball 1.5 0.0 -1.0\n"
    table = parse_embeddings(io.StringIO(text))
    assert table.dim == 3
    assert len(table) == 2
    assert np.array_equal(table.lookup("hand"), [0.1, -0.25, 3.0])
    sink = io.StringIO()
    write_embeddings(table, sink)
    again = parse_embeddings(io.StringIO(sink.getvalue()))
    assert again == table


def test_parse_embeddings_duplicate_keeps_last():
    text = "2 2\nhand 1 2\nhand 3 4\n"
    table = parse_embeddings(io.StringIO(text))
    assert np.array_equal(table.lookup("hand"), [3.0, 4.0])
    assert table.n_duplicates == 1


@pytest.mark.parametrize(
    "text",
    [
        "",  # no header
        "2\nhand 1 2\n",  # malformed header
        "2 2\nhand 1 2\n",  # declared 2 rows, has 1
        "1 2\nhand 1 2\nball 3 4\n",  # extra row
        "1 3\nhand 1 2\n",  # wrong vector width
        "1 2\nhand 1 oops\n",  # non-numeric
    ],
)
def test_parse_embeddings_rejects_bad_input(text):
    with pytest.raises(IngestError):
        parse_embeddings(io.StringIO(text))


def test_entity_vector_is_mean_of_words():
    table = EmbeddingTable(dim=2, vectors={"tennis": np.array([1.0, 3.0]), "ball": np.array([3.0, 5.0])})
    assert np.array_equal(table.entity_vector("tennis ball"), [2.0, 4.0])
    assert np.array_equal(table.entity_vector("ball"), [3.0, 5.0])


def test_entity_vector_lists_missing_words():
    table = EmbeddingTable(dim=2, vectors={"ball": np.array([1.0, 2.0])})
    with pytest.raises(MissingWordError) as err:
        table.entity_vector("shiny spoon")
    assert err.value.words == ["shiny", "spoon"]
    assert table.missing_words(["shiny spoon", "ball", "spoon"]) == ["shiny", "spoon"]


# ---------------------------------------------------------------------------
# Vocabulary


def test_parse_vocabulary_lowercases_and_dedups():
    vocab = parse_vocabulary(io.StringIO("Hand\nhand\ntennis  ball\n\nknife\n"))
    assert len(vocab) == 3
    assert "hand" in vocab
    assert "tennis ball" in vocab
    assert sorted(vocab) == ["hand", "knife", "tennis ball"]


def test_parse_vocabulary_rejects_three_words():
    with pytest.raises(IngestError) as err:
        parse_vocabulary(io.StringIO("big tennis ball\n"))
    assert "line 1" in str(err.value)


def test_vocabulary_type_enforces_word_count():
    with pytest.raises(IngestError):
        EntityVocabulary(frozenset({"one two three"}))


# ---------------------------------------------------------------------------
# JSON-lines round trips

_word = st.from_regex(r"[a-z][a-z0-9_]{0,9}", fullmatch=True)
_finite = st.floats(min_value=-1e9, max_value=1e9, allow_nan=False)


@st.composite
def _boxes(draw):
    x1 = draw(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False))
    y1 = draw(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False))
    w = draw(st.floats(min_value=1e-3, max_value=1e4, allow_nan=False))
    h = draw(st.floats(min_value=1e-3, max_value=1e4, allow_nan=False))
    return (x1, y1, x1 + w, y1 + h)


@st.composite
def _proposal_frames(draw, dim):
    n = draw(st.integers(1, 4))
    props = [
        Proposal(
            box=draw(_boxes()),
            feature=np.asarray(draw(st.lists(_finite, min_size=dim, max_size=dim))),
        )
        for _ in range(n)
    ]
    return ProposalFrame(
        frame_id=draw(_word),
        video_id=draw(_word),
        proposals=props,
        entity=draw(st.one_of(st.none(), _word)),
    )


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_proposal_frames_round_trip(data):
    dim = data.draw(st.integers(1, 5))
    frames = data.draw(st.lists(_proposal_frames(dim), min_size=0, max_size=4))
    sink = io.StringIO()
    write_proposal_frames(frames, sink, feature_dim=dim)
    back = read_proposal_frames(io.StringIO(sink.getvalue()))
    assert back == frames


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_frame_vectors_round_trip(data):
    dim = data.draw(st.integers(1, 6))
    frames = [
        FrameVector(
            frame_id=data.draw(_word),
            video_id=data.draw(_word),
            feature=np.asarray(data.draw(st.lists(_finite, min_size=dim, max_size=dim))),
            entity=data.draw(st.one_of(st.none(), _word)),
        )
        for _ in range(data.draw(st.integers(0, 4)))
    ]
    sink = io.StringIO()
    write_frame_vectors(frames, sink, feature_dim=dim)
    assert read_frame_vectors(io.StringIO(sink.getvalue())) == frames


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_gold_round_trip(data):
    records = [
        GoldAnnotation(
            frame_id=data.draw(_word),
            entity=data.draw(_word),
            boxes=tuple(data.draw(st.lists(_boxes(), min_size=0, max_size=3))),
        )
        for _ in range(data.draw(st.integers(0, 5)))
    ]
    sink = io.StringIO()
    write_gold(records, sink)
    assert read_gold(io.StringIO(sink.getvalue())) == records


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_pairs_round_trip(data):
    pairs = [
        EntityFramePair(
            entity=data.draw(_word),
            video_id=data.draw(_word),
            timestamp_s=data.draw(st.floats(min_value=0, max_value=1e6, allow_nan=False)),
            frame_id=data.draw(_word),
        )
        for _ in range(data.draw(st.integers(0, 5)))
    ]
    sink = io.StringIO()
    write_pairs(pairs, sink)
    assert read_pairs(io.StringIO(sink.getvalue())) == pairs


def test_float_precision_survives_round_trip():
    # Awkward decimals must come back bit-for-bit through the JSON writer.
    values = [0.1, 1 / 3, 2.7999999999999998, np.nextafter(1.0, 2.0)]
    frame = FrameVector(frame_id="f", video_id="v", feature=np.asarray(values))
    sink = io.StringIO()
    write_frame_vectors([frame], sink)
    back = read_frame_vectors(io.StringIO(sink.getvalue()))
    assert back[0].feature.tolist() == values


def test_read_proposal_frames_requires_header():
    body = '{"frame_id": "f", "video_id": "v", "proposals": []}\n'
    with pytest.raises(IngestError):
        read_proposal_frames(io.StringIO(body))
    with pytest.raises(IngestError):
        read_proposal_frames(io.StringIO('{"kind": "frame_vectors", "feature_dim": 2}\n'))


@pytest.mark.parametrize(
    "record",
    [
        '{"video_id": "v", "proposals": [{"box": [0,0,1,1], "feature": [1,2]}]}',  # no frame_id
        '{"frame_id": "f", "video_id": "v", "proposals": []}',  # empty proposals
        '{"frame_id": "f", "video_id": "v", "proposals": [{"box": [0,0,1,1], "feature": [1]}]}',  # dim
        '{"frame_id": "f", "video_id": "v", "proposals": [{"box": [2,0,1,1], "feature": [1,2]}]}',  # box
        '{"frame_id": "f", "video_id": "v", "proposals": [{"box": [0,0,1], "feature": [1,2]}]}',  # 3 coords
        "not json",
    ],
)
def test_read_proposal_frames_rejects_bad_records(record):
    text = '{"kind": "proposal_frames", "feature_dim": 2}\n' + record + "\n"
    with pytest.raises(IngestError) as err:
        read_proposal_frames(io.StringIO(text))
    assert "record 1" in str(err.value)


def test_gold_allows_empty_boxes_but_not_bad_ones():
    good = '{"frame_id": "f", "entity": "hand", "boxes": []}\n'
    assert read_gold(io.StringIO(good))[0].boxes == ()
    bad = '{"frame_id": "f", "entity": "hand", "boxes": [[0, 0, 0, 1]]}\n'
    with pytest.raises(IngestError):
        read_gold(io.StringIO(bad))


def test_feature_matrix_shape():
    frame = ProposalFrame(
        frame_id="f",
        video_id="v",
        proposals=[Proposal(box=(0, 0, 1, 1), feature=np.array([1.0, 2.0]))] * 3,
    )
    assert frame.feature_matrix().shape == (3, 2)
    assert frame.boxes == [(0, 0, 1, 1)] * 3
