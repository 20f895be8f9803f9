import io
import math
import struct
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from captionmcdm.embeddings import (
    DuplicateTokenWarning,
    EmbeddingTable,
    IngestionError,
    caption_vector,
    cosine_similarity,
    euclidean_distance,
    load_embeddings,
    load_stopwords,
)


def tsv(text):
    return io.BytesIO(text.encode("utf-8"))


class TestLoadEmbeddings:
    def test_single_line(self):
        table = load_embeddings(tsv("cat\t0.1\t0.2\n"), dimension=2)
        assert table.dimension == 2
        np.testing.assert_array_equal(table["cat"], [0.1, 0.2])

    def test_duplicate_keeps_first(self):
        with pytest.warns(DuplicateTokenWarning) as record:
            table = load_embeddings(tsv("cat\t0.1\t0.2\ncat\t9\t9\n"))
        assert len(record) == 1
        assert table.duplicate_count == 1
        np.testing.assert_array_equal(table["cat"], [0.1, 0.2])

    def test_wrong_component_count_names_line(self):
        with pytest.raises(IngestionError, match="line 2"):
            load_embeddings(tsv("dog\t1\t2\ncat\t0.1\n"), dimension=2)

    def test_dimension_mismatch_first_line(self):
        with pytest.raises(IngestionError, match="line 1"):
            load_embeddings(tsv("cat\t0.1\n"), dimension=2)

    def test_empty_stream(self):
        with pytest.raises(IngestionError):
            load_embeddings(tsv(""))

    def test_non_finite_rejected(self):
        with pytest.raises(IngestionError, match="line 1"):
            load_embeddings(tsv("cat\tnan\t1\n"))

    def test_case_insensitive_lookup(self):
        table = load_embeddings(tsv("Cat\t1\t0\n"))
        assert "CAT" in table
        np.testing.assert_array_equal(table.get("cAt"), [1.0, 0.0])

    def test_vectors_are_read_only(self):
        table = load_embeddings(tsv("cat\t1\t0\n"))
        with pytest.raises(ValueError):
            table["cat"][0] = 5.0

    def test_word2vec_binary(self):
        payload = b"2 3\n"
        payload += b"cat " + struct.pack("<3f", 1.0, 2.0, 3.0) + b"\n"
        payload += b"dog " + struct.pack("<3f", -1.0, 0.5, 0.0) + b"\n"
        table = load_embeddings(io.BytesIO(payload), format="binary", dimension=3)
        assert len(table) == 2
        np.testing.assert_array_equal(table["dog"], [-1.0, 0.5, 0.0])

    def test_binary_truncated(self):
        payload = b"1 3\ncat " + struct.pack("<2f", 1.0, 2.0)
        with pytest.raises(IngestionError, match="entry 1"):
            load_embeddings(io.BytesIO(payload), format="binary")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            load_embeddings(tsv("cat\t1\n"), format="glove")


def test_stopwords():
    assert load_stopwords(["A\n", "the\n", "\n"]) == {"a", "the"}
    with pytest.raises(IngestionError):
        load_stopwords(["\n"])


class TestCosine:
    def test_identical(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_zero_vector(self):
        assert cosine_similarity([0, 0], [1, 1]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity([1, 0], [1, 0, 0])


class TestEuclidean:
    def test_345(self):
        assert euclidean_distance([0, 0], [3, 4]) == 5.0

    def test_identity(self):
        assert euclidean_distance([0.3, -2.0, 7.0], [0.3, -2.0, 7.0]) == 0.0

    def test_1d(self):
        assert euclidean_distance([1], [4]) == 3.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            euclidean_distance([1], [1, 2])


@pytest.fixture
def small_table():
    return EmbeddingTable.from_dict({"cat": [0.1, 0.2], "red": [1, 0], "dog": [0, 1]})


class TestCaptionVector:
    def test_single_surviving_token(self, small_table):
        cv = caption_vector(["a", "cat"], small_table, {"a"})
        np.testing.assert_array_equal(cv.vector, [0.1, 0.2])
        assert cv.coverage == 1

    def test_all_stopwords(self, small_table):
        cv = caption_vector(["a", "the"], small_table, {"a", "the"})
        np.testing.assert_array_equal(cv.vector, [0.0, 0.0])
        assert cv.coverage == 0

    def test_vector_addition(self):
        table = EmbeddingTable.from_dict({"red": [1, 0], "cat": [0, 1]})
        cv = caption_vector(["red", "cat"], table, {"a"})
        np.testing.assert_array_equal(cv.vector, [1, 1])
        assert cv.coverage == 2

    def test_missing_tokens_reported(self, small_table):
        cv = caption_vector(["cat", "zebra"], small_table, {"a"})
        assert cv.coverage == 1
        assert cv.missing == ("zebra",)


vectors = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["cat", "red", "dog", "a", "the", "zebra"]), max_size=8), st.randoms())
def test_caption_vector_permutation_invariant(tokens, rnd):
    table = EmbeddingTable.from_dict({"cat": [0.1, 0.2], "red": [1, 0], "dog": [0, 1]})
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    a = caption_vector(tokens, table, {"a", "the"})
    b = caption_vector(shuffled, table, {"a", "the"})
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-12)
    assert a.coverage == b.coverage
    c = caption_vector(tokens + ["the"], table, {"a", "the"})
    np.testing.assert_array_equal(a.vector, c.vector)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(1e-3, 1e3))
def test_cosine_scale_invariant(v, k):
    if not any(v):
        return
    assert math.isclose(cosine_similarity(v, [k * x for x in v]), 1.0, abs_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, vectors)
def test_euclidean_metric(a, b, c):
    assert euclidean_distance(a, b) == pytest.approx(euclidean_distance(b, a))
    assert euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9
