"""The four prediction heads.

All heads read the command encoding (d, L) and, through the shared
multi-head attention, slot-conditioned summaries of it:

* group count: multi-class softmax over 0..K_MAX, conditioned on the
  summaries for the three trainable type queries;
* action: per-candidate-span sigmoid score;
* location / object: pointer softmax over the L token positions plus a
  trainable NIL sentinel at index L for the empty slot.

Score functions return pre-softmax values so the training loss can use
the numerically safe log-sum-exp path; the ``predict_*`` / ``score_*``
wrappers expose the probability form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .attention import multi_head_batched, multi_head_slf_attention
from .autograd import (Tensor, add, col, concat, matmul, ravel, repeat_col,
                       sigmoid, softmax, stack_cols, tanh, transpose)
from .encoders import embed_tokens, span_encoding
from .errors import DomainError

if TYPE_CHECKING:
    from .model import ModelParams

Span = tuple[int, int]


@dataclass
class GroupCountParams:
    """Classifier over 0..K_MAX groups plus the three type queries that
    condition it (the location/object heads reuse the matching query)."""

    w_cls: Tensor       # (K_MAX + 1, d)
    w_act_ctx: Tensor   # (d, d)
    w_loc_ctx: Tensor   # (d, d)
    w_obj_ctx: Tensor   # (d, d)
    q_action: Tensor    # (d,)
    q_location: Tensor  # (d,)
    q_object: Tensor    # (d,)


@dataclass
class ActionHeadParams:
    w_out: Tensor   # (d, 1)
    w_slot: Tensor  # (d, d), applied to the candidate's span encoding
    w_ctx: Tensor   # (d, d), applied to the attended sentence summary


@dataclass
class LocationHeadParams:
    w_out: Tensor  # (d, 1)
    w_tok: Tensor  # (d, d), per position
    w_act: Tensor  # (d, d), on the group's action encoding
    w_ctx: Tensor  # (d, d), on the attended summary
    nil: Tensor    # (d,), sentinel position embedding


@dataclass
class ObjectHeadParams:
    w_out: Tensor  # (d, 1)
    w_tok: Tensor  # (d, d)
    w_act: Tensor  # (d, d)
    w_loc: Tensor  # (d, d), on the predicted location's encoding
    w_ctx: Tensor  # (d, d)
    nil: Tensor    # (d,), sentinel; also stands in for an empty location value


def _attended(queries: list[Tensor], states: Tensor, model: "ModelParams",
              attn_sink=None) -> Tensor:
    return multi_head_batched(stack_cols(queries), states, model.attention,
                              attn_sink)


def group_count_scores(sent_states: Tensor, model: "ModelParams",
                       attn_sink=None) -> Tensor:
    """Pre-softmax class scores, one per group count 0..K_MAX."""
    c = model.count
    ctx = _attended([c.q_action, c.q_location, c.q_object], sent_states,
                    model, attn_sink)
    mixed = tanh(add(add(matmul(c.w_act_ctx, col(ctx, 0)),
                         matmul(c.w_loc_ctx, col(ctx, 1))),
                     matmul(c.w_obj_ctx, col(ctx, 2))))
    return matmul(c.w_cls, mixed)


def predict_group_count(sent_states: Tensor,
                        model: "ModelParams") -> tuple[Tensor, int]:
    """Class distribution and the argmax count (ties go to the smaller k)."""
    probs = softmax(group_count_scores(sent_states, model))
    return probs, int(np.argmax(probs.data))


def enumerate_action_candidates(length: int, max_span: int) -> list[Span]:
    """Every contiguous span of 1..max_span tokens, ordered by (start, end)."""
    if max_span < 1:
        raise DomainError("max_span must be >= 1")
    return [(s, e) for s in range(length)
            for e in range(s, min(s + max_span, length))]


def action_candidate_logits(emb: Tensor, spans: Sequence[Span],
                            sent_states: Tensor, model: "ModelParams",
                            attn_sink=None) -> Tensor:
    """Pre-sigmoid scores for all candidate spans at once (C,)."""
    a = model.action
    encodings = [span_encoding(emb, sp, model.slot_encoder) for sp in spans]
    queries = stack_cols(encodings)
    ctx = multi_head_batched(queries, sent_states, model.attention, attn_sink)
    mixed = tanh(add(matmul(a.w_slot, queries), matmul(a.w_ctx, ctx)))
    return ravel(matmul(transpose(a.w_out), mixed))


def score_action_candidate(span: Span, tokens: Sequence[str],
                           sent_states: Tensor,
                           model: "ModelParams") -> Tensor:
    """Probability that one candidate span is an action slot value."""
    a = model.action
    s, e = span
    emb = embed_tokens(list(tokens[s:e + 1]), model.embedding_table)
    enc = span_encoding(emb, (0, e - s), model.slot_encoder)
    ctx = multi_head_slf_attention(enc, sent_states, model.attention)
    mixed = tanh(add(matmul(a.w_slot, enc), matmul(a.w_ctx, ctx)))
    return sigmoid(matmul(ravel(a.w_out), mixed))


def _pointer_scores(sent_states: Tensor, nil: Tensor, bias: Tensor,
                    w_tok: Tensor, w_out: Tensor) -> Tensor:
    length = sent_states.shape[1]
    extended = concat([sent_states, stack_cols([nil])], axis=1)
    mixed = tanh(add(matmul(w_tok, extended), repeat_col(bias, length + 1)))
    return ravel(matmul(transpose(w_out), mixed))


def location_scores(sent_states: Tensor, action_enc: Tensor,
                    model: "ModelParams", attn_sink=None) -> Tensor:
    """Pre-softmax pointer scores over L positions + NIL for the location."""
    p = model.location
    ctx = col(_attended([model.count.q_location], sent_states, model,
                        attn_sink), 0)
    bias = add(matmul(p.w_act, action_enc), matmul(p.w_ctx, ctx))
    return _pointer_scores(sent_states, p.nil, bias, p.w_tok, p.w_out)


def score_location_positions(sent_states: Tensor, action_enc: Tensor,
                             model: "ModelParams") -> Tensor:
    """Pointer distribution over L + 1 positions for the location slot."""
    return softmax(location_scores(sent_states, action_enc, model))


def object_scores(sent_states: Tensor, action_enc: Tensor, loc_enc: Tensor,
                  model: "ModelParams", attn_sink=None) -> Tensor:
    """Pre-softmax pointer scores for the object, conditioned on the
    group's action and (possibly NIL) location encodings."""
    p = model.object_head
    ctx = col(_attended([model.count.q_object], sent_states, model,
                        attn_sink), 0)
    bias = add(add(matmul(p.w_act, action_enc), matmul(p.w_loc, loc_enc)),
               matmul(p.w_ctx, ctx))
    return _pointer_scores(sent_states, p.nil, bias, p.w_tok, p.w_out)


def score_object_positions(sent_states: Tensor, action_enc: Tensor,
                           loc_enc: Tensor, model: "ModelParams") -> Tensor:
    """Pointer distribution over L + 1 positions for the object slot."""
    return softmax(object_scores(sent_states, action_enc, loc_enc, model))
