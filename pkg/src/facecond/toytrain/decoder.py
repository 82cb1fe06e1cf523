"""Toy autoregressive decoder.

One embedding table plus one affine softmax readout. The decoder input
is laid out as [visual tokens][instruction embeddings][response
embeddings]; the logits for response position i come from mean-pooling
the prefix that ends just before that position. The mean pool is the
parameter-free stand-in for sequence mixing, which keeps the likelihood
autoregressive while the conditioning modules stay the subject under
test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_MAX_CONTEXT = 2048


@dataclass
class ToyDecoderParams:
    """embedding (vocab, d); readout (vocab, d) affine with bias."""

    embedding: np.ndarray
    readout_w: np.ndarray
    readout_b: np.ndarray

    @property
    def vocab(self) -> int:
        return self.embedding.shape[0]

    @property
    def d(self) -> int:
        return self.embedding.shape[1]


@dataclass
class DecoderSequence:
    """Assembled decoder input.

    rows is the (L, d) stack; the first n_visual rows are the flattened
    enriched visual tokens, followed by instruction and response
    embeddings.
    """

    rows: np.ndarray
    n_visual: int
    instruction_ids: tuple[int, ...]
    response_ids: tuple[int, ...]
    visual_shape: tuple[int, int, int]

    @property
    def length(self) -> int:
        return self.rows.shape[0]


@dataclass
class DecoderCache:
    sequence: DecoderSequence
    pooled: np.ndarray  # (R, d) mean-pooled prefixes
    probs: np.ndarray  # (R, vocab) softmax rows
    targets: tuple[int, ...]
    params: ToyDecoderParams


@dataclass
class DecoderGrads:
    d_embedding: np.ndarray
    d_readout_w: np.ndarray
    d_readout_b: np.ndarray
    d_visual: np.ndarray  # (T, N, d)


def init_decoder(vocab: int, d: int, seed: int = 0) -> ToyDecoderParams:
    if vocab < 2:
        raise ValueError("vocabulary needs at least 2 tokens")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d)
    return ToyDecoderParams(
        embedding=rng.uniform(-bound, bound, size=(vocab, d)),
        readout_w=rng.uniform(-bound, bound, size=(vocab, d)),
        readout_b=np.zeros(vocab),
    )


def _check_ids(ids: Sequence[int], vocab: int, what: str) -> tuple[int, ...]:
    ids = tuple(int(i) for i in ids)
    if any(i < 0 or i >= vocab for i in ids):
        raise ValueError(f"{what} token id out of range for vocab {vocab}")
    return ids


def sequence_assemble(
    visual: np.ndarray,
    instruction_ids: Sequence[int],
    response_ids: Sequence[int],
    params: ToyDecoderParams,
    max_context: int = DEFAULT_MAX_CONTEXT,
) -> DecoderSequence:
    """Lay out [visual tokens][instruction][response] as embedding rows.

    The visual block has length exactly T*N; landmark tokens never enter
    the sequence.
    """
    visual = np.asarray(visual, dtype=np.float64)
    if visual.ndim != 3 or visual.shape[2] != params.d:
        raise ValueError(f"visual tokens must be (T, N, {params.d}), got {visual.shape}")
    instruction_ids = _check_ids(instruction_ids, params.vocab, "instruction")
    response_ids = _check_ids(response_ids, params.vocab, "response")
    T, N, d = visual.shape
    total = T * N + len(instruction_ids) + len(response_ids)
    if total > max_context:
        raise ValueError(f"sequence length {total} exceeds context window {max_context}")
    rows = np.concatenate(
        [
            visual.reshape(T * N, d),
            params.embedding[list(instruction_ids)].reshape(len(instruction_ids), d),
            params.embedding[list(response_ids)].reshape(len(response_ids), d),
        ]
    )
    return DecoderSequence(rows, T * N, instruction_ids, response_ids, (T, N, d))


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def autoregressive_loss(
    sequence: DecoderSequence,
    targets: Sequence[int],
    params: ToyDecoderParams,
    return_cache: bool = False,
):
    """Mean negative log-likelihood of the response tokens.

    Position i is predicted from the mean of all rows before it (visual
    block, instruction, and earlier response tokens).
    """
    targets = _check_ids(targets, params.vocab, "target")
    if not targets:
        raise ValueError("response is empty; nothing to score")
    if targets != sequence.response_ids:
        raise ValueError("targets must cover exactly the response positions")
    n_prefix = sequence.n_visual + len(sequence.instruction_ids)
    pooled = np.empty((len(targets), params.d))
    for i in range(len(targets)):
        pooled[i] = sequence.rows[: n_prefix + i].mean(axis=0)
    logits = pooled @ params.readout_w.T + params.readout_b
    probs = _softmax(logits)
    picked = probs[np.arange(len(targets)), list(targets)]
    with np.errstate(divide="ignore"):
        loss = float(-np.log(picked).mean())
    if not np.isfinite(loss):
        raise ValueError("non-finite loss")
    if return_cache:
        return loss, DecoderCache(sequence, pooled, probs, targets, params)
    return loss


def response_predictions(cache: DecoderCache) -> np.ndarray:
    """Argmax token per response position, from a loss forward cache."""
    return cache.probs.argmax(axis=1)


def decoder_backward(cache: DecoderCache) -> DecoderGrads:
    """Gradients of the mean NLL with respect to decoder parameters and
    the visual block."""
    if cache is None:
        raise ValueError("missing forward cache")
    params = cache.params
    seq = cache.sequence
    R = len(cache.targets)
    n_prefix = seq.n_visual + len(seq.instruction_ids)

    d_logits = cache.probs.copy()
    d_logits[np.arange(R), list(cache.targets)] -= 1.0
    d_logits /= R

    d_readout_w = d_logits.T @ cache.pooled
    d_readout_b = d_logits.sum(axis=0)
    d_pooled = d_logits @ params.readout_w  # (R, d)

    d_rows = np.zeros_like(seq.rows)
    for i in range(R):
        span = n_prefix + i
        d_rows[:span] += d_pooled[i] / span

    T, N, d = seq.visual_shape
    d_visual = d_rows[: seq.n_visual].reshape(T, N, d)

    d_embedding = np.zeros_like(params.embedding)
    text_ids = list(seq.instruction_ids) + list(seq.response_ids)
    np.add.at(d_embedding, text_ids, d_rows[seq.n_visual :])

    return DecoderGrads(d_embedding, d_readout_w, d_readout_b, d_visual)
