import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emotrack.embeddings import (
    EmbeddingParseError,
    EmbeddingTable,
    NoOverlapError,
    align_with_lexicon,
    load_embeddings,
    parse_embeddings_binary,
    parse_embeddings_text,
    write_embeddings_binary,
    write_embeddings_text,
)
from emotrack.lexicon import AffectiveLexicon, EpaVector, LexiconEntry


def test_text_with_header(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("2 3\ncat 0.1 0.2 0.3\ndog 0.4 0.5 0.6\n")
    table = parse_embeddings_text(path)
    assert table.dimension == 3
    assert len(table) == 2
    assert np.allclose(table["dog"], [0.4, 0.5, 0.6])


def test_text_without_header(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("cat 0.1 0.2 0.3\ndog 0.4 0.5 0.6")
    table = parse_embeddings_text(path)
    assert table.dimension == 3 and table.tokens == ("cat", "dog")
    assert table.metadata["token_count"] == 2


def test_text_dimension_mismatch_names_line(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("2 3\ncat 0.1 0.2 0.3\ndog 0.4 0.5\n")
    with pytest.raises(EmbeddingParseError) as info:
        parse_embeddings_text(path)
    assert info.value.line == 3


def test_text_duplicate_token(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("cat 1 2\ncat 3 4\n")
    with pytest.raises(EmbeddingParseError, match="duplicate"):
        parse_embeddings_text(path)


@pytest.mark.parametrize("bad", ["nan", "inf", "x"])
def test_text_non_finite_or_non_numeric(tmp_path, bad):
    path = tmp_path / "e.txt"
    path.write_text(f"cat 1 {bad}\n")
    with pytest.raises(EmbeddingParseError, match="line 1"):
        parse_embeddings_text(path)


def test_text_header_count_mismatch(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("3 2\ncat 1 2\ndog 3 4\n")
    with pytest.raises(EmbeddingParseError, match="declares 3"):
        parse_embeddings_text(path)


def test_vocabulary_filter(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("3 2\ncat 1 2\ndog 3 4\nemu 5 6\n")
    table = parse_embeddings_text(path, vocabulary={"dog", "zebra"})
    assert table.tokens == ("dog",)
    assert table.metadata["token_count"] == 3


def _table():
    return EmbeddingTable.from_dict({"cat": [0.1, 0.2, 0.3], "shout_at": [-1.5, 2.0, 1e-3],
                                     "\U0001F602": [3.25, -0.125, 7.0]})


def test_binary_round_trip(tmp_path):
    table = _table()
    path = tmp_path / "e.bin"
    write_embeddings_binary(table, path)
    assert parse_embeddings_binary(path) == table
    assert load_embeddings(path) == table


def test_binary_layout_is_word2vec(tmp_path):
    table = EmbeddingTable.from_dict({"ab": [1.0, -2.0]})
    path = tmp_path / "e.bin"
    write_embeddings_binary(table, path)
    assert path.read_bytes() == b"1 2\nab " + struct.pack("<2f", 1.0, -2.0) + b"\n"


def test_binary_without_record_newlines(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(b"2 2\nab " + struct.pack("<2f", 1, 2) + b"cd " + struct.pack("<2f", 3, 4))
    table = parse_embeddings_binary(path)
    assert table.tokens == ("ab", "cd")
    assert np.array_equal(table["cd"], [3, 4])


def test_binary_truncated_after_header(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(b"2 3\n")
    with pytest.raises(EmbeddingParseError):
        parse_embeddings_binary(path)


def test_binary_truncated_vector(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(b"1 3\nab " + struct.pack("<2f", 1, 2))
    with pytest.raises(EmbeddingParseError, match="truncated"):
        parse_embeddings_binary(path)


def test_binary_extra_records(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(b"1 1\nab " + struct.pack("<f", 1) + b"\ncd " + struct.pack("<f", 2))
    with pytest.raises(EmbeddingParseError, match="beyond"):
        parse_embeddings_binary(path)


def test_binary_duplicate_and_nonfinite(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(b"2 1\nab " + struct.pack("<f", 1) + b"\nab " + struct.pack("<f", 2))
    with pytest.raises(EmbeddingParseError, match="duplicate"):
        parse_embeddings_binary(path)
    path.write_bytes(b"1 1\nab " + struct.pack("<f", float("nan")))
    with pytest.raises(EmbeddingParseError, match="non-finite"):
        parse_embeddings_binary(path)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=32), min_size=4, max_size=4),
                min_size=1, max_size=8))
def test_text_and_binary_agree(tmp_path_factory, rows):
    table = EmbeddingTable.from_dict({f"tok{i}": r for i, r in enumerate(rows)})
    d = tmp_path_factory.mktemp("fmt")
    write_embeddings_text(table, d / "e.txt")
    write_embeddings_binary(table, d / "e.bin")
    from_text = parse_embeddings_text(d / "e.txt")
    from_bin = parse_embeddings_binary(d / "e.bin")
    assert from_text.tokens == from_bin.tokens
    assert np.allclose(from_text.vectors, from_bin.vectors, rtol=np.finfo(np.float32).eps, atol=0)


def _lexicon(*terms):
    return AffectiveLexicon.from_entries(
        LexiconEntry(t, k, EpaVector(i, -i, 0.5 * i)) for i, (t, k) in enumerate(terms))


def test_align_reports_misses():
    table = EmbeddingTable.from_dict({"cat": [1, 0], "dog": [0, 1]})
    lex = _lexicon(("zzz", "identity"), ("dog", "identity"), ("cat", "identity"))
    pairs = align_with_lexicon(table, lex, ["identity"])
    assert pairs.tokens == ("cat", "dog")
    assert pairs.missing == ("zzz",)
    assert np.array_equal(pairs.x, [[1, 0], [0, 1]])
    assert np.array_equal(pairs.z[1], lex.lookup("dog", "identity").epa.to_array())


def test_align_no_overlap():
    table = EmbeddingTable.from_dict({"cat": [1, 0]})
    with pytest.raises(NoOverlapError):
        align_with_lexicon(table, _lexicon(("dog", "identity")), ["identity"])


def test_align_multiword_behavior():
    table = EmbeddingTable.from_dict({"shout_at": [1, 0], "shout": [0, 1]})
    pairs = align_with_lexicon(table, _lexicon(("shout at", "behavior")), ["behavior"])
    assert pairs.tokens == ("shout_at",)


def test_align_respects_kinds_and_dedupes():
    table = EmbeddingTable.from_dict({"happy": [1, 0], "run": [0, 1], "\U0001F602": [1, 1]})
    lex = _lexicon(("happy", "modifier"), ("happy", "identity"), ("run", "behavior"), ("\U0001F602", "emoji"))
    pairs = align_with_lexicon(table, lex, ["identity", "modifier", "behavior"])
    assert pairs.tokens == ("happy", "run")
    assert np.array_equal(pairs.z[0], lex.lookup("happy", "identity").epa.to_array())
    assert len(pairs) <= min(len(table), len(lex))


def test_table_rejects_bad_vectors():
    with pytest.raises(ValueError):
        EmbeddingTable(2, ("a",), np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        EmbeddingTable(2, ("a", "a"), np.zeros((2, 2)))
