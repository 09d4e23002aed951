"""Group-count-driven decoding over the slot dependency graph.

The graph template for k groups: every slot node hangs off the command
node, each group's location and object depend on its action, and the
object also depends on the location.  There are no edges between
groups, so groups decode independently of each other.  Decoding visits
heads in topological order: count, all actions at once, then per group
(in action start order) location followed by object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autograd import Tensor, softmax
from .data import NLCExample, SLFGroup, Span
from .encoders import dep_fused_encode, embed_tokens, span_encoding
from .errors import DomainError
from .heads import (action_candidate_logits, enumerate_action_candidates,
                    group_count_scores, location_scores, object_scores)
from .model import ModelConfig, ModelParams

NLC_NODE = "NLC"


@dataclass
class SemanticProbGraph:
    nodes: list[str]
    edges: list[tuple[str, str]]

    def parents(self, node: str) -> list[str]:
        return [src for src, dst in self.edges if dst == node]


def build_graph(k: int, k_max: int = 3) -> SemanticProbGraph:
    """Instantiate the edge template for ``k`` groups."""
    if not 0 <= k <= k_max:
        raise DomainError(f"group count {k} outside [0, {k_max}]")
    nodes = [NLC_NODE]
    edges: list[tuple[str, str]] = []
    for g in range(1, k + 1):
        a, l, o = f"Action_{g}", f"Location_{g}", f"Object_{g}"
        nodes += [a, l, o]
        edges += [(NLC_NODE, a), (NLC_NODE, l), (NLC_NODE, o),
                  (a, l), (a, o), (l, o)]
    return SemanticProbGraph(nodes=nodes, edges=edges)


def span_from_distribution(probs, beta: float) -> Span | None:
    """Turn a pointer distribution over L positions + NIL into a span.

    NIL argmax means the slot is empty.  Otherwise the argmax position
    anchors the span, which extends over neighbours whose probability is
    at least beta times the anchor's.
    """
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must be in (0, 1], got {beta}")
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    length = arr.shape[0] - 1
    anchor = int(np.argmax(arr))
    if anchor == length:
        return None
    threshold = beta * arr[anchor]
    s = e = anchor
    while s - 1 >= 0 and arr[s - 1] >= threshold:
        s -= 1
    while e + 1 <= length - 1 and arr[e + 1] >= threshold:
        e += 1
    return (s, e)


@dataclass
class DecodeTrace:
    """Everything one decode computed, for inspection and tests."""

    invocations: list[tuple] = field(default_factory=list)
    count_probs: np.ndarray | None = None
    predicted_k: int = 0
    candidates: list[Span] = field(default_factory=list)
    action_scores: np.ndarray | None = None
    selected_actions: list[Span] = field(default_factory=list)
    location_probs: list[np.ndarray] = field(default_factory=list)
    object_probs: list[np.ndarray] = field(default_factory=list)
    attention: dict[str, list[np.ndarray]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class SLFParse:
    """Final decode result: k groups sorted by action start index."""

    k: int
    groups: list[SLFGroup]
    trace: DecodeTrace


def _select_actions(candidates: list[Span], scores: np.ndarray,
                    k: int) -> list[Span]:
    # Greedy by descending score; ties keep candidate order (lower
    # (start, end) first); spans overlapping a previous pick are skipped.
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    picked: list[Span] = []
    for i in order:
        if len(picked) == k:
            break
        s, e = candidates[i]
        if any(s <= pe and ps <= e for ps, pe in picked):
            continue
        picked.append(candidates[i])
    return sorted(picked)


def decode(example: NLCExample, model: ModelParams,
           config: ModelConfig | None = None) -> SLFParse:
    """Deterministic parse of one command with a trained model."""
    cfg = config if config is not None else model.config
    trace = DecodeTrace()
    emb = embed_tokens(example.tokens, model.embedding_table)
    sent = dep_fused_encode(emb, example.dep_heads, model.dep_config,
                            model.nlc_layers)
    length = len(example.tokens)

    sink = trace.attention.setdefault("count", [])
    count_probs = softmax(group_count_scores(sent, model, attn_sink=sink))
    trace.count_probs = count_probs.data.copy()
    trace.predicted_k = int(np.argmax(count_probs.data))
    trace.invocations.append(("count",))

    trace.candidates = enumerate_action_candidates(length, cfg.max_span)
    sink = trace.attention.setdefault("actions", [])
    logits = action_candidate_logits(emb, trace.candidates, sent, model,
                                     attn_sink=sink)
    # Scores are reported as probabilities; ranking by logit is identical.
    trace.action_scores = 1.0 / (1.0 + np.exp(-np.abs(logits.data)))
    trace.action_scores = np.where(logits.data >= 0, trace.action_scores,
                                   1.0 - trace.action_scores)
    trace.invocations.append(("actions",))

    selected = _select_actions(trace.candidates, logits.data,
                               trace.predicted_k)
    if len(selected) < trace.predicted_k:
        trace.warnings.append(
            f"predicted {trace.predicted_k} groups but only "
            f"{len(selected)} non-overlapping action spans fit")
    trace.selected_actions = selected

    groups: list[SLFGroup] = []
    for g, action_span in enumerate(selected, start=1):
        action_enc = span_encoding(emb, action_span, model.slot_encoder)
        sink = trace.attention.setdefault(f"location_{g}", [])
        loc_probs = softmax(location_scores(sent, action_enc, model,
                                            attn_sink=sink))
        trace.location_probs.append(loc_probs.data.copy())
        trace.invocations.append(("location", g))
        loc_span = span_from_distribution(loc_probs.data, cfg.beta)

        if loc_span is None:
            loc_enc = model.object_head.nil
        else:
            loc_enc = span_encoding(emb, loc_span, model.slot_encoder)
        sink = trace.attention.setdefault(f"object_{g}", [])
        obj_probs = softmax(object_scores(sent, action_enc, loc_enc, model,
                                          attn_sink=sink))
        trace.object_probs.append(obj_probs.data.copy())
        trace.invocations.append(("object", g))
        obj_span = span_from_distribution(obj_probs.data, cfg.beta)

        groups.append(SLFGroup(action=action_span, location=loc_span,
                               object=obj_span))

    return SLFParse(k=len(groups), groups=groups, trace=trace)


def render_slf(parse: SLFParse, tokens: Sequence[str]) -> str:
    """One line per group:
    ALO(action_name_g="...", location_name_g="..."|NIL, object_name_g="..."|NIL)
    """
    def text(span: Span | None) -> str:
        if span is None:
            return "NIL"
        return '"' + " ".join(tokens[span[0]:span[1] + 1]) + '"'

    lines = []
    for g, grp in enumerate(parse.groups, start=1):
        lines.append(f"ALO(action_name_{g}={text(grp.action)}, "
                     f"location_name_{g}={text(grp.location)}, "
                     f"object_name_{g}={text(grp.object)})")
    return "\n".join(lines)
