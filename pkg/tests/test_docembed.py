import numpy as np
import pytest

from dietvec import sgns
from dietvec.docembed import DocVectorTable, TokenDocument, infer_doc_vector, train_dbow
from dietvec.textembed import EmbedConfig, EmbeddingError
from oracles import central_difference, relative_error

CONFIG = EmbedConfig(dim=24, epochs=20, min_count=1, subsample=0.0)


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def planted_docs(seed, n_per=30):
    """Template A documents share most tokens; template B uses a disjoint pool."""
    rng = np.random.default_rng(seed)
    pool_a = [f"a{i}" for i in range(10)]
    pool_b = [f"b{i}" for i in range(10)]
    docs = []
    for i in range(n_per):
        core = pool_a[:8]
        extra = list(rng.choice(pool_a[8:] + ["x", "y"], size=2))
        docs.append(TokenDocument(f"A{i}", tuple(core + extra)))
    for i in range(n_per):
        docs.append(TokenDocument(f"B{i}", tuple(rng.choice(pool_b, size=8))))
    return docs


def test_shape_and_finite():
    table = train_dbow(planted_docs(0), CONFIG)
    assert table.vectors.shape == (60, 24) and np.isfinite(table.vectors).all()
    assert table.output.shape == (len(table.vocab), 24)


@pytest.mark.parametrize("seed", range(5))
def test_planted_templates_separate(seed):
    docs = planted_docs(seed)
    table = train_dbow(docs, EmbedConfig(dim=24, epochs=20, min_count=1, subsample=0.0,
                                         rng_seed=seed))
    a = [table[d.doc_id] for d in docs if d.doc_id.startswith("A")]
    b = [table[d.doc_id] for d in docs if d.doc_id.startswith("B")]
    within = np.mean([cosine(x, y) for i, x in enumerate(a) for y in a[i + 1:]])
    between = np.mean([cosine(x, y) for x in a for y in b])
    assert within > between


def pooled_docs(seed):
    """Six disjoint token pools, fifteen documents each."""
    rng = np.random.default_rng(seed)
    docs = []
    for p in range(6):
        pool = [f"p{p}t{i}" for i in range(8)]
        docs += [TokenDocument(f"d{p}_{i}", tuple(rng.choice(pool, size=6))) for i in range(15)]
    return docs


@pytest.mark.parametrize("seed", range(5))
def test_identical_documents_are_close(seed):
    twin = ("p0t1", "p0t2", "p0t3", "p0t5", "p0t6")
    docs = pooled_docs(seed) + [TokenDocument("twin1", twin), TokenDocument("twin2", twin)]
    table = train_dbow(docs, EmbedConfig(dim=24, epochs=50, alpha=0.05, min_count=1,
                                         subsample=0.0, rng_seed=seed))
    unit = table.vectors / np.linalg.norm(table.vectors, axis=1, keepdims=True)
    sims = unit @ unit.T
    n = len(unit)
    mean_pairwise = (sims.sum() - n) / (n * (n - 1))
    assert cosine(table["twin1"], table["twin2"]) > mean_pairwise


def test_empty_document_excluded():
    docs = planted_docs(0) + [TokenDocument("empty", ())]
    table = train_dbow(docs, CONFIG)
    assert table.excluded == ["empty"] and "empty" not in table.doc_ids


def test_needs_two_documents():
    with pytest.raises(EmbeddingError):
        train_dbow([TokenDocument("only", ("a",))], CONFIG)


def test_self_inference():
    docs = planted_docs(2)
    table = train_dbow(docs, CONFIG)
    for doc in docs[:5] + docs[-5:]:
        vec, unknown = infer_doc_vector(doc.tokens, table, seed=3)
        assert not unknown
        assert cosine(vec, table[doc.doc_id]) > 0.5


def test_inference_is_deterministic_and_frozen():
    table = train_dbow(planted_docs(2), CONFIG)
    before = table.output.copy()
    a, _ = infer_doc_vector(("a1", "a2"), table, seed=5)
    b, _ = infer_doc_vector(("a1", "a2"), table, seed=5)
    assert a.tobytes() == b.tobytes()
    assert np.array_equal(before, table.output)


def test_unknown_tokens():
    table = train_dbow(planted_docs(0), CONFIG)
    vec, unknown = infer_doc_vector(("nope", "never"), table)
    assert unknown and not vec.any()
    vec, unknown = infer_doc_vector((), table)
    assert unknown


def test_bitwise_reproducible():
    docs = planted_docs(4)
    a = train_dbow(docs, CONFIG)
    b = train_dbow(docs, CONFIG)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.output.tobytes() == b.output.tobytes()


def test_token_order_does_not_change_vocabulary():
    docs = planted_docs(4)
    shuffled = [TokenDocument(d.doc_id, tuple(reversed(d.tokens))) for d in docs]
    assert train_dbow(docs, CONFIG).vocab == train_dbow(shuffled, CONFIG).vocab


def test_parallel_mode():
    table = train_dbow(planted_docs(0), EmbedConfig(dim=8, min_count=1, strict=False))
    assert np.isfinite(table.vectors).all()


def test_save_load(tmp_path):
    table = train_dbow(planted_docs(0), CONFIG)
    table.save(tmp_path)
    loaded = DocVectorTable.load(tmp_path, CONFIG)
    assert loaded.doc_ids == table.doc_ids and loaded.vocab.tokens == table.vocab.tokens
    np.testing.assert_array_equal(loaded.vectors, table.vectors.astype(np.float32))


@pytest.mark.parametrize("seed", range(20))
def test_dbow_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    n_docs, v, d = int(rng.integers(2, 6)), int(rng.integers(3, 9)), int(rng.integers(1, 10))
    docvecs = rng.normal(scale=0.5, size=(n_docs, d))
    out = rng.normal(scale=0.5, size=(v, d))
    doc, token = int(rng.integers(n_docs)), int(rng.integers(v))
    negatives = rng.integers(0, v, size=int(rng.integers(1, 6)))

    def loss():
        return sgns.dbow_pair_loss(docvecs, out, doc, token, negatives)[0]

    _, g_doc, g_out = sgns.dbow_pair_loss(docvecs, out, doc, token, negatives)
    n_doc, n_out = central_difference(loss, [docvecs, out])
    assert relative_error(g_doc, n_doc) < 1e-4
    assert relative_error(g_out, n_out) < 1e-4
