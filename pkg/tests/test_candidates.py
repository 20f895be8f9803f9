import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from captionmcdm.candidates import (
    MIL,
    QUERY_EXPANSION,
    TagPrediction,
    build_mil_vector,
    build_q_vector,
    choose_reference,
    load_tag_predictions,
    select_candidates,
)
from captionmcdm.embeddings import EmbeddingTable, IngestionError, cosine_similarity
from captionmcdm.retrieval import ImageRecord, Neighbor, NeighborSet
from captionmcdm.text import CaptionRecord


def image(image_id, *captions, feature=(0.0,)):
    caps = tuple(CaptionRecord.from_text(image_id, k, c) for k, c in enumerate(captions))
    return ImageRecord(image_id, np.array(feature), caps)


def neighborhood(*pairs, radius):
    """pairs of (ImageRecord, distance)."""
    entries = tuple(Neighbor(r, d) for r, d in pairs)
    return NeighborSet(entries, radius, min(d for _, d in pairs), 0.0)


TABLE = EmbeddingTable.from_dict({
    "cat": [1, 0], "red": [0, 1], "dog": [2, 4], "box": [8, 8], "tennis": [1, 1], "ball": [0, 2],
    "two": [2, 0],
})
STOP = frozenset({"a", "the"})


class TestMilVector:
    def test_single(self):
        np.testing.assert_array_equal(build_mil_vector([TagPrediction("cat", 0.9, "noun")], TABLE), [1, 0])

    def test_empty(self):
        assert build_mil_vector([], TABLE) is None

    def test_sum(self):
        tags = [TagPrediction("cat", 0.9), TagPrediction("red", 0.8)]
        np.testing.assert_array_equal(build_mil_vector(tags, TABLE), [1, 1])

    def test_multiword(self):
        np.testing.assert_array_equal(build_mil_vector([TagPrediction("tennis ball", 0.5)], TABLE), [1, 3])

    def test_unknown_only(self):
        assert build_mil_vector([TagPrediction("zebra", 0.9)], TABLE) is None

    def test_min_probability(self):
        tags = [TagPrediction("cat", 0.9), TagPrediction("red", 0.1)]
        np.testing.assert_array_equal(build_mil_vector(tags, TABLE, min_probability=0.5), [1, 0])
        assert build_mil_vector(tags, TABLE, min_probability=0.95) is None

    def test_probability_weighting(self):
        tags = [TagPrediction("cat", 0.5), TagPrediction("red", 0.25)]
        np.testing.assert_allclose(build_mil_vector(tags, TABLE, weight_by_probability=True), [0.5, 0.25])

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            TagPrediction("cat", 1.5)


class TestQVector:
    def test_single_weight_one(self):
        ns = neighborhood((image("i", "dog"), 0.0), radius=1.0)
        np.testing.assert_allclose(build_q_vector(ns, TABLE, STOP), [2, 4])

    def test_half_weight(self):
        ns = neighborhood((image("i", "dog"), 1.0), radius=2.0)
        np.testing.assert_allclose(build_q_vector(ns, TABLE, STOP), [1, 2])

    def test_two_images(self):
        ns = neighborhood((image("i", "two"), 0.0), (image("j", "box"), 2.0), radius=2.0)
        np.testing.assert_allclose(build_q_vector(ns, TABLE, STOP), [1, 0])

    def test_empty(self):
        with pytest.raises(ValueError):
            build_q_vector(NeighborSet((), 1.0, 1.0, 0.0), TABLE, STOP)

    def test_zero_weight_duplicate_keeps_direction(self):
        base = neighborhood((image("i", "dog", "a cat"), 0.5), (image("j", "red cat"), 1.0), radius=2.0)
        dup = neighborhood(
            (image("i", "dog", "a cat"), 0.5), (image("j", "red cat"), 1.0), (image("k", "box box"), 2.0),
            radius=2.0,
        )
        q1 = build_q_vector(base, TABLE, STOP)
        q2 = build_q_vector(dup, TABLE, STOP)
        assert cosine_similarity(q1, q2) == pytest.approx(1.0, abs=1e-12)


class TestSelectCandidates:
    def test_saturation(self):
        ns = neighborhood((image("i", "cat", "red", "dog"), 0.0), radius=1.0)
        cs = select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=10)
        assert len(cs) == 3
        assert cs.pool_size == 3
        cos = [c.cosine_to_reference for c in cs.entries]
        assert cos == sorted(cos, reverse=True)

    def test_dominant(self):
        ns = neighborhood((image("i", "red", "dog", "cat"), 0.0), radius=1.0)
        cs = select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=1)
        assert cs[0].caption.text == "cat"

    def test_tie_break_by_visual_similarity(self):
        ns = neighborhood((image("far", "cat"), 0.7), (image("near", "a cat"), 0.1), radius=1.0)
        cs = select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=2)
        assert cs[0].source_image_id == "near"
        assert cs[0].source_visual_similarity == pytest.approx(0.9)
        assert cs[1].source_visual_similarity == pytest.approx(0.3)

    def test_tie_break_by_text(self):
        ns = neighborhood((image("i", "the cat", "a cat"), 0.0), radius=1.0)
        cs = select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=2)
        assert [c.caption.text for c in cs.entries] == ["a cat", "the cat"]

    def test_no_captions(self):
        ns = neighborhood((image("i"), 0.0), radius=1.0)
        with pytest.raises(ValueError):
            select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=2)

    def test_bad_n(self):
        ns = neighborhood((image("i", "cat"), 0.0), radius=1.0)
        with pytest.raises(ValueError):
            select_candidates(ns, np.array([1.0, 0.0]), TABLE, STOP, n=0)


def test_choose_reference_branches():
    ns = neighborhood((image("i", "dog"), 0.0), radius=1.0)
    ref, kind = choose_reference([TagPrediction("cat", 0.9)], ns, TABLE, STOP)
    assert kind == MIL
    np.testing.assert_array_equal(ref, build_mil_vector([TagPrediction("cat", 0.9)], TABLE))
    ref, kind = choose_reference([TagPrediction("zebra", 0.9)], ns, TABLE, STOP)
    assert kind == QUERY_EXPANSION
    np.testing.assert_allclose(ref, [2, 4])


WORDS = ["cat", "red", "dog", "box", "two", "ball", "zebra", "a"]


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=4), min_size=1, max_size=5),
             min_size=1, max_size=6),
    st.lists(st.floats(0, 1), min_size=6, max_size=6),
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.integers(1, 40),
)
def test_prefix_of_full_sort(images, dists, ref, n):
    pairs = [
        (image(f"im{k}", *[" ".join(c) for c in caps]), dists[k])
        for k, caps in enumerate(images)
    ]
    ns = neighborhood(*pairs, radius=1.0)
    ref = np.array(ref)
    cs = select_candidates(ns, ref, TABLE, STOP, n=n)
    # oracle: score every caption independently, then sort on the declared key
    pool = []
    for (img, d) in pairs:
        for cap in img.captions:
            vec = np.zeros(2)
            for t in cap.tokens:
                if t not in STOP and t in TABLE:
                    vec = vec + TABLE[t]
            pool.append((-cosine_similarity(vec, ref), -(1 - d), cap.text, cap.caption_id))
    pool.sort()
    assert [c.caption.caption_id for c in cs.entries] == [p[3] for p in pool[:n]]


def test_load_tags():
    text = '{"image_id": "q1", "tags": [{"word": "Woman", "prob": 0.97, "pos": "noun"}, {"word": "hit", "prob": 0.2}]}\n'
    tags = load_tag_predictions(io.StringIO(text))
    assert tags["q1"][0] == TagPrediction("woman", 0.97, "noun")
    assert tags["q1"][1].category == "unknown"
    with pytest.raises(IngestionError, match="line 1"):
        load_tag_predictions(io.StringIO('{"image_id": "q1", "tags": [{"word": "x", "prob": 2}]}\n'))
