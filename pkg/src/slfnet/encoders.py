"""Token embedding and the two sentence encoders.

The command encoder is a stack of BiLSTMs whose inter-layer inputs mix
each token's hidden state with its dependency parent's state through a
small interaction function; the slot-value encoder is a plain BiLSTM
with its own weights.  Hidden size per direction is half the model
width, so every encoder output column has the full width ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .autograd import (Tensor, col, concat, gather_cols, matmul, record_op,
                       repeat_col, tanh, embedding_cols)
from .errors import DataError, DimensionError, DomainError

PASSTHROUGH = "passthrough"
LEARNED = "learned"


@dataclass
class EmbeddingTable:
    """Vocabulary plus a trainable (V, d) vector table.

    Index 0 is reserved for the unknown token; out-of-vocabulary lookups
    map there.
    """

    vocab: dict[str, int]
    vectors: Tensor
    unk_index: int = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def indices(self, tokens: Sequence[str]) -> list[int]:
        return [self.vocab.get(t, self.unk_index) for t in tokens]


def embed_tokens(tokens: Sequence[str], table: EmbeddingTable) -> Tensor:
    """Column matrix (d, L) of token vectors, differentiable into the table."""
    if len(tokens) == 0:
        raise DomainError("cannot embed an empty token list")
    return embedding_cols(table.vectors, table.indices(tokens))


@dataclass
class LSTMDirection:
    """One direction's gate weights (4h, d_in + h) and bias (4h,)."""

    W: Tensor
    b: Tensor


@dataclass
class BiLSTMParams:
    fwd: LSTMDirection
    bwd: LSTMDirection

    @property
    def hidden(self) -> int:
        return self.fwd.W.shape[0] // 4

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden


def lstm_sequence(x: Tensor, direction: LSTMDirection, reverse: bool) -> Tensor:
    """Fused LSTM pass over a (d_in, L) column sequence; one tape entry."""
    h4, win = direction.W.shape
    if h4 % 4 != 0 or win != x.shape[0] + h4 // 4:
        raise DimensionError(
            f"lstm_sequence: weights {direction.W.shape} do not fit input "
            f"{x.shape}")
    if direction.b.shape != (h4,):
        raise DimensionError(
            f"lstm_sequence: bias {direction.b.shape} must be ({h4},)")
    hidden, cache = kernels.lstm_forward(x.data, direction.W.data,
                                         direction.b.data, reverse)

    def grad_fn(g):
        return kernels.lstm_backward(np.ascontiguousarray(g), cache)

    return record_op(hidden, (x, direction.W, direction.b), grad_fn)


def bilstm_encode(x: Tensor, params: BiLSTMParams) -> Tensor:
    """(d, L) encoding: column i is [forward state at i; backward state at i]."""
    f = lstm_sequence(x, params.fwd, reverse=False)
    b = lstm_sequence(x, params.bwd, reverse=True)
    return concat([f, b], axis=0)


def span_encoding(emb: Tensor, span: tuple[int, int],
                  params: BiLSTMParams) -> Tensor:
    """Slot-value vector: the final-position output column of the
    slot-value BiLSTM run over the span's embedded tokens."""
    s, e = span
    segment = gather_cols(emb, list(range(s, e + 1)))
    states = bilstm_encode(segment, params)
    return col(states, e - s)


@dataclass
class DepFusedConfig:
    """Layer count and interaction mode of the command encoder."""

    num_layers: int = 2
    interaction_mode: str = LEARNED

    def validate(self) -> None:
        if self.num_layers < 1:
            raise DomainError("num_layers must be >= 1")
        if self.interaction_mode not in (LEARNED, PASSTHROUGH):
            raise DomainError(
                f"unknown interaction_mode {self.interaction_mode!r}")


@dataclass
class DepFusedLayer:
    """One encoder layer: a BiLSTM plus (in learned mode) the parent
    interaction weights W_g (d, 2d) and b_g (d,)."""

    lstm: BiLSTMParams
    W_g: Tensor | None = None
    b_g: Tensor | None = None


def interaction_g(h_i: Tensor, h_parent: Tensor, mode: str,
                  W_g: Tensor | None = None,
                  b_g: Tensor | None = None) -> Tensor:
    """Mix one token's state with its dependency parent's state.

    Learned mode computes tanh(W_g [h_i; h_parent] + b_g); passthrough
    returns h_i unchanged, which makes the whole encoder collapse to a
    plain stacked BiLSTM (useful for ablations and exact reduction tests).
    """
    if mode == PASSTHROUGH:
        return h_i
    if mode != LEARNED:
        raise DomainError(f"unknown interaction mode {mode!r}")
    pair = concat([h_i, h_parent], axis=0)
    return tanh(matmul(W_g, pair) + b_g)


def _validate_heads(dep_heads: Sequence[int], length: int) -> None:
    for i, h in enumerate(dep_heads):
        if not 0 <= h < length:
            raise DataError(
                f"dependency head out of range at token {i}: {h} not in "
                f"[0, {length})")


def _interact_layer(states: Tensor, dep_heads: Sequence[int],
                    layer: DepFusedLayer, mode: str) -> Tensor:
    if mode == PASSTHROUGH:
        return states
    length = states.shape[1]
    parents = gather_cols(states, list(dep_heads))
    pairs = concat([states, parents], axis=0)
    return tanh(matmul(layer.W_g, pairs) + repeat_col(layer.b_g, length))


def dep_fused_encode(embeddings: Tensor, dep_heads: Sequence[int],
                     config: DepFusedConfig,
                     layers: Sequence[DepFusedLayer]) -> Tensor:
    """Sentence encoding (d, L) from the dependency-fused BiLSTM stack.

    Each layer first replaces every column with the interaction of the
    token's state and its parent's state, then runs a BiLSTM.  Stacking
    two layers lets grandparent information reach a token.  The root
    token carries a self-loop (its head is its own index).
    """
    config.validate()
    if len(layers) != config.num_layers:
        raise DimensionError(
            f"expected {config.num_layers} layers, got {len(layers)}")
    if len(dep_heads) != embeddings.shape[1]:
        raise DataError(
            f"dep_heads length {len(dep_heads)} does not match sentence "
            f"length {embeddings.shape[1]}")
    _validate_heads(dep_heads, embeddings.shape[1])
    states = embeddings
    for layer in layers:
        mixed = _interact_layer(states, dep_heads, layer,
                                config.interaction_mode)
        states = bilstm_encode(mixed, layer.lstm)
    return states
