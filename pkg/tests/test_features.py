import numpy as np
import pytest

from confmpu.data import Dictionary, ParseError, corpus_from_texts
from confmpu.features import (
    FeatureConfig,
    embed,
    featurize,
    hashed_embedding,
    lexicon_features,
    zero_lexicon_bits,
)


def _dict(entries, names=("LOC",)):
    return Dictionary(entries=tuple(entries), class_names=tuple(names))


def _sentence(words):
    return corpus_from_texts([list(words)], ["LOC"]).sentences[0]


def test_lexicon_bigram_bit():
    d = _dict([(("New", "York"), 1)])
    bits = lexicon_features(_sentence(["in", "New", "York", "city"]), d, 2)
    # token "New": unigram miss, bigram hit
    assert bits[1].tolist() == [0.0, 1.0]
    assert bits[2].tolist() == [0.0, 1.0]
    assert bits[0].tolist() == [0.0, 0.0]
    assert bits[3].tolist() == [0.0, 0.0]


def test_lexicon_empty_dictionary_all_zero():
    d = Dictionary(entries=(), class_names=("LOC",))
    bits = lexicon_features(_sentence(["a", "b"]), d, 3)
    assert not bits.any()


def test_lexicon_unigram_window_three():
    d = _dict([(("sepsis",), 1)])
    bits = lexicon_features(_sentence(["sepsis"]), d, 3)
    assert bits[0].tolist() == [1.0, 0.0, 0.0]


def test_lexicon_bits_are_class_agnostic():
    d = _dict([(("a",), 1), (("b",), 2)], names=("LOC", "ORG"))
    bits = lexicon_features(_sentence(["a", "b"]), d, 1)
    assert bits.tolist() == [[1.0], [1.0]]


def test_hashed_embedding_deterministic_and_unit_norm():
    a = hashed_embedding("cat", 16, seed=3)
    b = hashed_embedding("cat", 16, seed=3)
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-9
    assert not np.array_equal(a, hashed_embedding("cat", 16, seed=4))
    assert not np.array_equal(a, hashed_embedding("dog", 16, seed=3))


def test_embed_from_file_with_hashed_fallback(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("cat 0.1 0.2\n")
    cfg = FeatureConfig(embed_dim=2, embed_source="file", embed_path=str(path))
    assert embed("cat", cfg).tolist() == [0.1, 0.2]
    oov = embed("dog", cfg)
    assert np.array_equal(oov, hashed_embedding("dog", 2, 0))


def test_embed_file_with_word2vec_header(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("1 2\ncat 0.5 0.5\n")
    cfg = FeatureConfig(embed_dim=2, embed_source="file", embed_path=str(path))
    assert embed("cat", cfg).tolist() == [0.5, 0.5]


def test_embed_file_malformed(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("cat 0.1\n")
    cfg = FeatureConfig(embed_dim=2, embed_source="file", embed_path=str(path))
    with pytest.raises(ParseError):
        embed("cat", cfg)


def test_featurize_shapes_and_identity_window():
    corpus = corpus_from_texts([["a", "b", "c"], ["d"]], ["LOC"])
    d = _dict([(("b",), 1)])
    cfg = FeatureConfig(embed_dim=5, window=2, context_radius=0)
    feats = featurize(corpus, d, cfg)
    assert [m.shape for m in feats] == [(3, 7), (1, 7)]
    # radius 0: embedding block equals embed() exactly
    assert np.array_equal(feats[0][0, :5], embed("a", cfg))


def test_featurize_window_mean():
    corpus = corpus_from_texts([["a", "b", "c"]], ["LOC"])
    d = _dict([(("zzz",), 1)])
    cfg = FeatureConfig(embed_dim=4, window=1, context_radius=1)
    feats = featurize(corpus, d, cfg)
    ea, eb, ec = (embed(t, cfg) for t in "abc")
    assert np.allclose(feats[0][1, :4], (ea + eb + ec) / 3.0)
    assert np.allclose(feats[0][0, :4], (ea + eb) / 2.0)  # clipped at bounds


def test_featurize_deterministic(tiny_corpus, tiny_dictionary):
    cfg = FeatureConfig()
    a = featurize(tiny_corpus, tiny_dictionary, cfg)
    b = featurize(tiny_corpus, tiny_dictionary, cfg)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_zero_lexicon_bits_masks_only_bits(tiny_corpus, tiny_dictionary):
    cfg = FeatureConfig()
    feats = featurize(tiny_corpus, tiny_dictionary, cfg)
    masked = zero_lexicon_bits(feats, cfg)
    for orig, m in zip(feats, masked):
        assert np.array_equal(m[:, : cfg.embed_dim], orig[:, : cfg.embed_dim])
        assert not m[:, cfg.embed_dim:].any()
    # original untouched
    assert any(mat[:, cfg.embed_dim:].any() for mat in feats)


def test_feature_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(embed_dim=0)
    with pytest.raises(ValueError):
        FeatureConfig(window=0)
    with pytest.raises(ValueError):
        FeatureConfig(embed_source="file")  # missing path
    with pytest.raises(ValueError):
        FeatureConfig(embed_source="magic")
