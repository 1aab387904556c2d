import json

import numpy as np
import pytest

from rumourstance.features import (SCALAR_FEATURES, FeatureExtractor, PostNotInThread, WordVectors, cosine,
                                   extract_features)
from rumourstance.threads import Post, parse_thread


@pytest.fixture
def thread():
    return parse_thread(json.dumps({"thread_id": "t", "platform": "twitter", "posts": [
        {"id": "r", "parent_id": None, "text": "Storm hits city http://x.co", "label": "support", "media": True},
        {"id": "a", "parent_id": "r", "text": "Is this real?? not sure, damn!", "label": "query"},
        {"id": "b", "parent_id": "a", "text": "", "label": "comment"},
    ]}))


def col(name):
    return SCALAR_FEATURES.index(name)


def test_feature_values(thread):
    wv = WordVectors(8)
    root = extract_features(thread.posts["r"], thread, wv)
    reply = extract_features(thread.posts["a"], thread, wv)
    empty = extract_features(thread.posts["b"], thread, wv)
    assert root.shape == (len(SCALAR_FEATURES) + 8,)
    assert root[col("is_source")] == 1 and reply[col("is_source")] == 0
    assert root[col("has_url")] == 1 and root[col("has_image")] == 1
    assert root[col("cos_to_source")] == pytest.approx(1.0)
    assert reply[col("count_question")] == 2 and reply[col("count_exclaim")] == 1
    assert reply[col("negation_count")] >= 1 and reply[col("swear_count")] >= 1
    assert empty[col("token_count")] == 0 and empty[col("cos_to_source")] == 0.0
    assert np.all(np.isfinite(empty))


def test_word_vectors_deterministic(tmp_path):
    a, b = WordVectors(6), WordVectors(6)
    np.testing.assert_array_equal(a["storm"], b["storm"])
    assert np.linalg.norm(a["storm"]) == pytest.approx(1.0)
    (tmp_path / "v.txt").write_text("storm 1 0 0\ncity 0 1 0\n")
    wv = WordVectors.load(tmp_path / "v.txt")
    assert wv.dim == 3 and cosine(wv["storm"], wv["city"]) == 0.0
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_extractor_and_errors(thread):
    fx = FeatureExtractor(dim=5).fit()
    X = fx.transform([(p, thread) for p in thread.posts.values()])
    assert X.shape == (3, len(SCALAR_FEATURES) + 5)
    assert len(fx.get_feature_names_out()) == X.shape[1]
    stranger = Post("zz", "hi", "r", "t", "twitter")
    with pytest.raises(PostNotInThread):
        fx.transform([(stranger, thread)])
