"""Slot-conditioned attention over the encoded command.

A head scores each sentence position by the bilinear form
(W_query q)^T (W_key s_i), normalizes the scores with softmax and
returns the weighted sum of the encoder columns.  No scaling factor is
applied to the scores.  The multi-head form stacks the per-head
summaries as columns and mixes them with a trainable (h, 1) weight,
one scalar per head.

A per-position (L, 1) mixing weight would not type-check against h
stacked d-vectors, which is why the per-head reading is used here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autograd import (Tensor, add, element, matmul, mul, ravel, softmax,
                       softmax_rows, stack_cols, transpose)


@dataclass
class SLFAttentionHead:
    """Square query/key projections, both (d, d)."""

    W_query: Tensor
    W_key: Tensor


@dataclass
class MultiHeadSLFAttention:
    heads: list[SLFAttentionHead]
    W_mix: Tensor  # (h, 1), one mixing scalar per head

    @property
    def num_heads(self) -> int:
        return len(self.heads)


def slf_attention(query: Tensor, states: Tensor,
                  head: SLFAttentionHead) -> tuple[Tensor, Tensor]:
    """One head's conditioned summary of ``states`` (d, L) for a (d,) query.

    Returns the summary vector and the (L,) attention weights.
    """
    q = matmul(head.W_query, query)
    keys = matmul(head.W_key, states)
    scores = matmul(q, keys)
    weights = softmax(scores)
    summary = matmul(states, weights)
    return summary, weights


def multi_head_slf_attention(query: Tensor, states: Tensor,
                             mh: MultiHeadSLFAttention) -> Tensor:
    """Mix per-head summaries into one d-vector.

    With a single head and a unit mixing weight this reproduces
    ``slf_attention`` bit for bit.
    """
    summaries = [slf_attention(query, states, head)[0] for head in mh.heads]
    stacked = stack_cols(summaries)
    return ravel(matmul(stacked, mh.W_mix))


def slf_attention_batched(queries: Tensor, states: Tensor,
                          head: SLFAttentionHead) -> tuple[Tensor, Tensor]:
    """Vectorized ``slf_attention`` for (d, C) query columns.

    Returns (d, C) summaries and (C, L) attention weights; row c equals
    the single-query result for column c up to float rounding.
    """
    q = matmul(head.W_query, queries)
    keys = matmul(head.W_key, states)
    scores = matmul(transpose(q), keys)
    weights = softmax_rows(scores)
    summaries = matmul(states, transpose(weights))
    return summaries, weights


def multi_head_batched(queries: Tensor, states: Tensor,
                       mh: MultiHeadSLFAttention,
                       attn_sink: list | None = None) -> Tensor:
    """Vectorized multi-head mixing for (d, C) query columns.

    ``attn_sink``, when given, receives one (C, L) weight array per head
    (decode traces use this).
    """
    mixed = None
    for j, head in enumerate(mh.heads):
        summaries, weights = slf_attention_batched(queries, states, head)
        if attn_sink is not None:
            attn_sink.append(weights.data.copy())
        term = mul(summaries, element(mh.W_mix, (j, 0)))
        mixed = term if mixed is None else add(mixed, term)
    return mixed
