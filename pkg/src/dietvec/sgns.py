"""Negative-sampling objective shared by the skip-gram and DBOW trainers.

For an input row ``u`` (a word's input vector in skip-gram, a document vector
in DBOW), a positive output row ``v`` and sampled negatives ``v_k`` the loss is

    L = -log sigmoid(u . v) - sum_k log sigmoid(-u . v_k)

The numba kernels below take one SGD step on L per (input, positive) pair,
exactly as ``param -= alpha * dL/dparam`` when the targets are distinct.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def negative_sampling_loss(u, v_pos, v_negs):
    """Loss and analytic gradients for one (input, positive, negatives) step.

    Returns ``(loss, grad_u, grad_pos, grad_negs)``; ``grad_negs`` has one row
    per negative.
    """
    u = np.asarray(u, dtype=float)
    v_pos = np.asarray(v_pos, dtype=float)
    v_negs = np.atleast_2d(np.asarray(v_negs, dtype=float))
    s_pos = u @ v_pos
    s_neg = v_negs @ u if v_negs.size else np.zeros(0)
    loss = np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg).sum()
    coef_pos = _sigmoid(s_pos) - 1.0
    coef_neg = _sigmoid(s_neg)
    grad_u = coef_pos * v_pos + coef_neg @ v_negs if v_negs.size else coef_pos * v_pos
    grad_pos = coef_pos * u
    grad_negs = coef_neg[:, None] * u[None, :]
    return float(loss), grad_u, grad_pos, grad_negs


def _pair_loss(inputs, outputs, row, target, negatives):
    negatives = np.asarray(negatives, dtype=np.int64)
    loss, g_u, g_pos, g_negs = negative_sampling_loss(
        inputs[row], outputs[target], outputs[negatives]
    )
    grad_in = np.zeros_like(inputs, dtype=float)
    grad_out = np.zeros_like(outputs, dtype=float)
    grad_in[row] = g_u
    grad_out[target] += g_pos
    np.add.at(grad_out, negatives, g_negs)
    return loss, grad_in, grad_out


def skipgram_pair_loss(word_in, word_out, center, context, negatives):
    """Loss of predicting ``context`` from ``center`` with full-matrix gradients."""
    return _pair_loss(word_in, word_out, center, context, negatives)


def dbow_pair_loss(doc_vectors, token_out, doc, token, negatives):
    """Loss of document ``doc`` predicting ``token`` with full-matrix gradients."""
    return _pair_loss(doc_vectors, token_out, doc, token, negatives)


def unigram_cdf(counts: np.ndarray, power: float = 0.75) -> np.ndarray:
    weights = np.asarray(counts, dtype=float) ** power
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def keep_probabilities(counts: np.ndarray, threshold: float) -> np.ndarray:
    """Probability of keeping each token under frequency subsampling.

    A token of relative frequency f is discarded with probability
    ``1 - sqrt(threshold / f)``; ``threshold == 0`` disables subsampling.
    """
    counts = np.asarray(counts, dtype=float)
    if threshold <= 0 or counts.sum() == 0:
        return np.ones(counts.size)
    freq = counts / counts.sum()
    return np.minimum(1.0, np.sqrt(threshold / freq))


@njit(cache=True)
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform(state):
    return (_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _draw_targets(positive, cdf, negative, state, targets):
    """Fill ``targets`` with the positive then up to ``negative`` negatives.

    Draws equal to the positive are dropped.  Returns the filled length.
    """
    targets[0] = positive
    n = 1
    last = cdf.size - 1
    for _ in range(negative):
        t = np.searchsorted(cdf, _uniform(state), side="right")
        if t > last:
            t = last
        if t == positive:
            continue
        targets[n] = t
        n += 1
    return n


@njit(cache=True)
def sgd_step(inp, out, targets, n_targets, alpha, update_output, work):
    """One negative-sampling SGD step on input row ``inp``.

    ``targets[0]`` is the positive; the rest are negatives.  Output rows are
    updated in place unless ``update_output`` is false (frozen inference).
    """
    d = inp.shape[0]
    for j in range(d):
        work[j] = 0.0
    for k in range(n_targets):
        t = targets[k]
        f = 0.0
        for j in range(d):
            f += inp[j] * out[t, j]
        label = 1.0 if k == 0 else 0.0
        g = (label - 0.5 * (1.0 + np.tanh(0.5 * f))) * alpha
        for j in range(d):
            work[j] += g * out[t, j]
        if update_output:
            for j in range(d):
                out[t, j] += g * inp[j]
    for j in range(d):
        inp[j] += work[j]


def _skipgram_chunks(syn0, syn1, tokens, offsets, keep, cdf, epochs, alpha0, alpha_min,
                     negative, states, chunk_bounds):
    n_chunks = chunk_bounds.size - 1
    d = syn0.shape[1]
    max_len = 1
    for i in range(offsets.size - 1):
        if offsets[i + 1] - offsets[i] > max_len:
            max_len = offsets[i + 1] - offsets[i]
    for c in prange(n_chunks):
        state = states[c:c + 1]
        first, stop = chunk_bounds[c], chunk_bounds[c + 1]
        total = epochs * (offsets[stop] - offsets[first])
        done = 0
        work = np.zeros(d)
        targets = np.empty(negative + 1, dtype=np.int64)
        kept = np.empty(max_len, dtype=np.int64)
        for _ in range(epochs):
            for doc in range(first, stop):
                alpha = alpha0 - (alpha0 - alpha_min) * done / max(total, 1)
                m = 0
                for p in range(offsets[doc], offsets[doc + 1]):
                    w = tokens[p]
                    if keep[w] < 1.0 and _uniform(state) >= keep[w]:
                        continue
                    kept[m] = w
                    m += 1
                for i in range(m):
                    for j in range(m):
                        if i == j:
                            continue
                        n = _draw_targets(kept[j], cdf, negative, state, targets)
                        sgd_step(syn0[kept[i]], syn1, targets, n, alpha, True, work)
                done += offsets[doc + 1] - offsets[doc]


def _dbow_chunks(docvecs, syn1, tokens, offsets, keep, cdf, epochs, alpha0, alpha_min,
                 negative, update_output, states, chunk_bounds):
    n_chunks = chunk_bounds.size - 1
    d = docvecs.shape[1]
    for c in prange(n_chunks):
        state = states[c:c + 1]
        first, stop = chunk_bounds[c], chunk_bounds[c + 1]
        total = epochs * (offsets[stop] - offsets[first])
        done = 0
        work = np.zeros(d)
        targets = np.empty(negative + 1, dtype=np.int64)
        for _ in range(epochs):
            for doc in range(first, stop):
                alpha = alpha0 - (alpha0 - alpha_min) * done / max(total, 1)
                for p in range(offsets[doc], offsets[doc + 1]):
                    w = tokens[p]
                    if keep[w] < 1.0 and _uniform(state) >= keep[w]:
                        continue
                    n = _draw_targets(w, cdf, negative, state, targets)
                    sgd_step(docvecs[doc], syn1, targets, n, alpha, update_output, work)
                done += offsets[doc + 1] - offsets[doc]


skipgram_serial = njit(cache=True)(_skipgram_chunks)
skipgram_parallel = njit(cache=True, parallel=True)(_skipgram_chunks)
dbow_serial = njit(cache=True)(_dbow_chunks)
dbow_parallel = njit(cache=True, parallel=True)(_dbow_chunks)


def chunking(n_docs: int, strict: bool, workers: int | None = None):
    """Document ranges and RNG streams for the serial or racy-parallel kernels."""
    import numba

    n_chunks = 1 if strict else max(1, min(n_docs, workers or numba.get_num_threads()))
    bounds = np.linspace(0, n_docs, n_chunks + 1).round().astype(np.int64)
    return n_chunks, bounds


def chunk_states(seed: int, n_chunks: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(n_chunks, dtype=np.uint64).copy()


def flatten(docs) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate integer documents into (tokens, offsets) arrays."""
    lengths = np.fromiter((len(doc) for doc in docs), dtype=np.int64)
    offsets = np.zeros(lengths.size + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.empty(offsets[-1], dtype=np.int64)
    for i, doc in enumerate(docs):
        tokens[offsets[i]:offsets[i + 1]] = doc
    return tokens, offsets
