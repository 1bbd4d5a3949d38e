from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dietvec import sgns
from dietvec.textembed import (
    EmbedConfig,
    EmbeddingError,
    WordVectorTable,
    build_vocabulary,
    embed_name,
    tokenize,
    train_word_vectors,
)
from dietvec.vectorize import VectorizeError
from oracles import central_difference, relative_error, sgns_loss


@pytest.mark.parametrize("name, tokens", [
    ("Cheddar Cheese, Shredded", ["cheddar", "cheese", "shredded"]),
    ("2% Milk (Skim)", ["2%", "milk", "skim"]),
    ("---", []),
    ("Crème Brûlée", ["cr", "me", "br", "l", "e"]),
])
def test_tokenize(name, tokens):
    assert tokenize(name) == tokens


@given(st.text())
def test_tokenize_idempotent(name):
    tokens = tokenize(name)
    assert tokenize(" ".join(tokens)) == tokens


def test_vocabulary_examples():
    vocab = build_vocabulary([["a", "b"], ["a"]], 1)
    assert vocab.index == {"a": 0, "b": 1} and list(vocab.counts) == [2, 1]
    assert build_vocabulary([["a", "b"], ["a"]], 2).tokens == ("a",)
    assert len(build_vocabulary([], 1)) == 0


def test_vocabulary_ties_are_lexicographic():
    assert build_vocabulary([["z", "y", "x", "x"]]).tokens == ("x", "y", "z")


def test_vocabulary_frequency_oracle():
    rng = np.random.default_rng(5)
    words = [f"w{i}" for i in range(60)]
    names = [[words[j] for j in rng.zipf(1.6, size=rng.integers(1, 6)) % 60] for _ in range(1000)]
    counts = {}
    for name in names:
        for tok in name:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = build_vocabulary(names, 3)
    assert set(vocab.tokens) == {t for t, n in counts.items() if n >= 3}
    assert all(vocab.count_of(t) == counts[t] for t in vocab.tokens)
    order = [(-counts[t], t) for t in vocab.tokens]
    assert order == sorted(order)


SMALL = EmbedConfig(dim=16, epochs=5, min_count=1, subsample=0.0)


def test_shape_and_finite():
    docs = [["a", "b", "c"], ["b", "c"], ["d", "a"]] * 5
    table = train_word_vectors(docs, SMALL)
    assert table.vectors.shape == (4, 16)
    assert np.isfinite(table.vectors).all()


def test_empty_vocabulary_errors():
    with pytest.raises(EmbeddingError, match="no trainable tokens"):
        train_word_vectors([["a"]], EmbedConfig(min_count=2))


@pytest.mark.parametrize("field", ["dim", "negative", "epochs"])
def test_config_validation(field):
    with pytest.raises(EmbeddingError):
        EmbedConfig(**{field: 0})


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("n", [20, 50])
def test_cooccurring_tokens_are_closer(seed, n):
    # p and q share the context token c; r lives in a separate pool
    docs = [["p", "q", "c"]] * n + [["r", "s", "t"]] * n
    table = train_word_vectors(docs, EmbedConfig(dim=20, epochs=5, min_count=1, subsample=0.0,
                                                 rng_seed=seed))
    assert cosine(table["p"], table["q"]) > cosine(table["p"], table["r"])


def test_single_token_corpus():
    table = train_word_vectors([["salt"]] * 10, SMALL)
    assert "salt" in table and np.isfinite(table["salt"]).all()


def test_embed_name_examples():
    table = train_word_vectors([["a", "b"], ["b", "c"]] * 3, SMALL)
    vec, oov = embed_name(["a"], table)
    assert not oov and np.array_equal(vec, table["a"])
    vec, _ = embed_name(["a", "b"], table)
    np.testing.assert_allclose(vec, (table["a"] + table["b"]) / 2, rtol=0, atol=1e-15)
    vec, oov = embed_name(["zzz-unknown"], table)
    assert oov and not vec.any()


@settings(max_examples=50, deadline=None)
@given(st.permutations(["a", "b", "c", "zzz", "a"]))
def test_embed_name_permutation_invariant(tokens):
    table = train_word_vectors([["a", "b"], ["b", "c"]] * 3, SMALL)
    assert np.array_equal(embed_name(tokens, table)[0], embed_name(["a", "a", "b", "c"], table)[0])


def test_bitwise_reproducible():
    docs = [tokenize(n) for n in ["Cheddar Cheese", "Swiss Cheese Slice", "Beef Steak",
                                  "Ground Beef", "Cheese Pizza"]] * 4
    a = train_word_vectors(docs, SMALL)
    b = train_word_vectors(docs, SMALL)
    assert a.vectors.tobytes() == b.vectors.tobytes()


def test_parallel_mode_trains(small_corpus):
    docs = [tokenize(f.name) for f in small_corpus.foods.values()]
    table = train_word_vectors(docs, EmbedConfig(dim=16, min_count=1, strict=False))
    assert np.isfinite(table.vectors).all()


def test_row_norms_bounded(small_corpus):
    docs = [tokenize(f.name) for f in small_corpus.foods.values()]
    table = train_word_vectors(docs, EmbedConfig(dim=32, epochs=20, min_count=1, alpha=0.05))
    assert np.linalg.norm(table.vectors, axis=1).max() < 100


def test_save_load_round_trip(tmp_path):
    table = train_word_vectors([["a", "b"], ["b", "c"]] * 3, SMALL)
    table.save(tmp_path / "w.nvec")
    loaded = WordVectorTable.load(tmp_path / "w.nvec")
    assert loaded.vocab.tokens == table.vocab.tokens
    assert list(loaded.vocab.counts) == list(table.vocab.counts)
    np.testing.assert_array_equal(loaded.vectors, table.vectors.astype(np.float32))


def random_instance(seed):
    rng = np.random.default_rng(seed)
    v, d, neg = int(rng.integers(3, 9)), int(rng.integers(1, 12)), int(rng.integers(1, 6))
    word_in = rng.normal(scale=0.5, size=(v, d))
    word_out = rng.normal(scale=0.5, size=(v, d))
    center, context = rng.choice(v, size=2, replace=False)
    negatives = rng.integers(0, v, size=neg)
    return word_in, word_out, int(center), int(context), negatives


@pytest.mark.parametrize("seed", range(20))
def test_skipgram_gradient_matches_finite_differences(seed):
    word_in, word_out, center, context, negatives = random_instance(seed)

    def loss():
        return sgns.skipgram_pair_loss(word_in, word_out, center, context, negatives)[0]

    _, g_in, g_out = sgns.skipgram_pair_loss(word_in, word_out, center, context, negatives)
    n_in, n_out = central_difference(loss, [word_in, word_out])
    assert relative_error(g_in, n_in) < 1e-4
    assert relative_error(g_out, n_out) < 1e-4


def test_loss_matches_plain_formula():
    word_in, word_out, center, context, negatives = random_instance(3)
    loss = sgns.skipgram_pair_loss(word_in, word_out, center, context, negatives)[0]
    expected = sgns_loss(word_in[center], word_out[context], word_out[negatives])
    assert loss == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_kernel_step_is_gradient_descent(seed):
    rng = np.random.default_rng(seed)
    inp = rng.normal(size=6)
    out = rng.normal(size=(5, 6))
    targets = np.array([2, 0, 4], dtype=np.int64)
    alpha = 0.05
    _, g_u, g_pos, g_negs = sgns.negative_sampling_loss(inp, out[2], out[[0, 4]])
    expected_in = inp - alpha * g_u
    expected_out = out.copy()
    expected_out[2] -= alpha * g_pos
    expected_out[[0, 4]] -= alpha * g_negs
    sgns.sgd_step(inp, out, targets, 3, alpha, True, np.zeros(6))
    np.testing.assert_allclose(inp, expected_in, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(out, expected_out, rtol=1e-12, atol=1e-14)


def test_unigram_table_and_subsampling():
    cdf = sgns.unigram_cdf(np.array([16, 1]))
    assert cdf[0] == pytest.approx(8 / 9) and cdf[-1] == 1.0
    keep = sgns.keep_probabilities(np.array([99, 1]), 0.01)
    assert keep[0] == pytest.approx(np.sqrt(0.01 / 0.99)) and keep[1] == 1.0
    assert (sgns.keep_probabilities(np.array([5, 5]), 0.0) == 1).all()


def test_vectorize_error_is_value_error():
    # callers catch ValueError for every validation failure
    assert issubclass(VectorizeError, ValueError) and issubclass(EmbeddingError, ValueError)
