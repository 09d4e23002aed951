"""Model surface: configuration, every trainable tensor, and the three
ways of materializing them (fresh init, clone, checkpoint restore).

Parameter names are stable strings ("nlc.layer0.fwd.W", "action.w_out",
...); optimizers, checkpoints and the gradient checker all key on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .attention import MultiHeadSLFAttention, SLFAttentionHead
from .autograd import Tensor
from .encoders import (LEARNED, BiLSTMParams, DepFusedConfig, DepFusedLayer,
                       EmbeddingTable, LSTMDirection)
from .errors import ConfigError
from .heads import (ActionHeadParams, GroupCountParams, LocationHeadParams,
                    ObjectHeadParams)
from .rng import XorShift64Star


@dataclass
class ModelConfig:
    d: int = 32
    num_layers: int = 2
    num_heads: int = 2
    k_max: int = 3
    max_span: int = 3
    beta: float = 0.5
    interaction_mode: str = LEARNED
    zero_query: bool = False  # ablation: freeze query projections at zero

    def validate(self) -> None:
        if self.d <= 0 or self.d % 2 != 0:
            raise ConfigError(f"d must be a positive even integer, got {self.d}")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if self.num_heads < 1:
            raise ConfigError("num_heads must be >= 1")
        if self.k_max < 0:
            raise ConfigError("k_max must be >= 0")
        if self.max_span < 1:
            raise ConfigError("max_span must be >= 1")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError("beta must be in (0, 1]")
        if self.interaction_mode not in ("learned", "passthrough"):
            raise ConfigError(
                f"interaction_mode must be learned or passthrough, "
                f"got {self.interaction_mode!r}")


class ModelParams:
    """All trainable tensors plus the vocabulary and config they fit."""

    def __init__(self, config: ModelConfig, embedding_table: EmbeddingTable,
                 dep_config: DepFusedConfig, nlc_layers: list[DepFusedLayer],
                 slot_encoder: BiLSTMParams,
                 attention: MultiHeadSLFAttention, count: GroupCountParams,
                 action: ActionHeadParams, location: LocationHeadParams,
                 object_head: ObjectHeadParams, frozen: set[str]):
        self.config = config
        self.embedding_table = embedding_table
        self.dep_config = dep_config
        self.nlc_layers = nlc_layers
        self.slot_encoder = slot_encoder
        self.attention = attention
        self.count = count
        self.action = action
        self.location = location
        self.object_head = object_head
        self.frozen = frozen
        # Full training config, when known; checkpoints persist it so a
        # later eval can reproduce the dataset split.
        self.train_config = None

    @property
    def vocab(self) -> dict[str, int]:
        return self.embedding_table.vocab

    def named_parameters(self) -> dict[str, Tensor]:
        """Every trainable tensor keyed by its stable name, in a fixed order."""
        out: dict[str, Tensor] = {"embeddings": self.embedding_table.vectors}
        for l, layer in enumerate(self.nlc_layers):
            out[f"nlc.layer{l}.fwd.W"] = layer.lstm.fwd.W
            out[f"nlc.layer{l}.fwd.b"] = layer.lstm.fwd.b
            out[f"nlc.layer{l}.bwd.W"] = layer.lstm.bwd.W
            out[f"nlc.layer{l}.bwd.b"] = layer.lstm.bwd.b
            if layer.W_g is not None:
                out[f"nlc.layer{l}.interact.W"] = layer.W_g
                out[f"nlc.layer{l}.interact.b"] = layer.b_g
        out["slot.fwd.W"] = self.slot_encoder.fwd.W
        out["slot.fwd.b"] = self.slot_encoder.fwd.b
        out["slot.bwd.W"] = self.slot_encoder.bwd.W
        out["slot.bwd.b"] = self.slot_encoder.bwd.b
        for j, head in enumerate(self.attention.heads):
            out[f"attn.head{j}.W_query"] = head.W_query
            out[f"attn.head{j}.W_key"] = head.W_key
        out["attn.W_mix"] = self.attention.W_mix
        c = self.count
        out["count.w_cls"] = c.w_cls
        out["count.w_act_ctx"] = c.w_act_ctx
        out["count.w_loc_ctx"] = c.w_loc_ctx
        out["count.w_obj_ctx"] = c.w_obj_ctx
        out["count.q_action"] = c.q_action
        out["count.q_location"] = c.q_location
        out["count.q_object"] = c.q_object
        out["action.w_out"] = self.action.w_out
        out["action.w_slot"] = self.action.w_slot
        out["action.w_ctx"] = self.action.w_ctx
        p = self.location
        out["location.w_out"] = p.w_out
        out["location.w_tok"] = p.w_tok
        out["location.w_act"] = p.w_act
        out["location.w_ctx"] = p.w_ctx
        out["location.nil"] = p.nil
        o = self.object_head
        out["object.w_out"] = o.w_out
        out["object.w_tok"] = o.w_tok
        out["object.w_act"] = o.w_act
        out["object.w_loc"] = o.w_loc
        out["object.w_ctx"] = o.w_ctx
        out["object.nil"] = o.nil
        return out

    def trainable_parameters(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.named_parameters().items()
                if k not in self.frozen}

    def clone(self) -> "ModelParams":
        current = self.named_parameters()
        twin = build_model(dict(self.vocab), self.config,
                           lambda name, shape: current[name].data.copy())
        twin.train_config = self.train_config
        return twin

    @classmethod
    def initialize(cls, vocab: dict[str, int], config: ModelConfig, seed: int,
                   pretrained: np.ndarray | None = None) -> "ModelParams":
        """Fresh parameters from the deterministic generator.

        Weight matrices draw uniformly from +-1/sqrt(d); LSTM biases start
        at zero with the forget block at +1; embeddings draw from +-0.1
        unless a pretrained (V, d) table is supplied.
        """
        config.validate()
        rng = XorShift64Star(seed)
        d = config.d
        half = d // 2
        scale = 1.0 / math.sqrt(d)

        def uniform(shape, bound):
            n = int(np.prod(shape))
            vals = [rng.uniform_in(-bound, bound) for _ in range(n)]
            return np.array(vals).reshape(shape)

        def source(name: str, shape: tuple[int, ...]) -> np.ndarray:
            if name == "embeddings":
                if pretrained is not None:
                    if pretrained.shape != shape:
                        raise ConfigError(
                            f"pretrained table shape {pretrained.shape} does "
                            f"not match vocabulary/width {shape}")
                    return np.array(pretrained, dtype=np.float64)
                return uniform(shape, 0.1)
            if name.endswith("fwd.b") or name.endswith("bwd.b"):
                b = np.zeros(shape)
                b[half:2 * half] = 1.0
                return b
            if name == "attn.W_mix":
                return np.full(shape, 1.0 / config.num_heads)
            if name.endswith("interact.b"):
                return np.zeros(shape)
            if config.zero_query and ".W_query" in name:
                return np.zeros(shape)
            return uniform(shape, scale)

        return build_model(vocab, config, source)


def build_model(vocab: dict[str, int], config: ModelConfig,
                source: Callable[[str, tuple[int, ...]], np.ndarray]
                ) -> ModelParams:
    """Assemble a ModelParams whose tensor values come from ``source``.

    The same walk serves fresh init, cloning and checkpoint restore, so
    parameter names and creation order cannot drift between them.
    """
    config.validate()
    d = config.d
    half = d // 2
    gate_rows = 4 * half

    def T(name: str, *shape: int) -> Tensor:
        return Tensor(source(name, shape))

    def direction(prefix: str, d_in: int) -> LSTMDirection:
        return LSTMDirection(W=T(f"{prefix}.W", gate_rows, d_in + half),
                             b=T(f"{prefix}.b", gate_rows))

    table = EmbeddingTable(vocab=vocab,
                           vectors=T("embeddings", len(vocab), d))
    dep_config = DepFusedConfig(num_layers=config.num_layers,
                                interaction_mode=config.interaction_mode)
    layers = []
    for l in range(config.num_layers):
        lstm = BiLSTMParams(fwd=direction(f"nlc.layer{l}.fwd", d),
                            bwd=direction(f"nlc.layer{l}.bwd", d))
        if config.interaction_mode == LEARNED:
            layers.append(DepFusedLayer(
                lstm=lstm,
                W_g=T(f"nlc.layer{l}.interact.W", d, 2 * d),
                b_g=T(f"nlc.layer{l}.interact.b", d)))
        else:
            layers.append(DepFusedLayer(lstm=lstm))
    slot = BiLSTMParams(fwd=direction("slot.fwd", d),
                        bwd=direction("slot.bwd", d))
    heads = [SLFAttentionHead(W_query=T(f"attn.head{j}.W_query", d, d),
                              W_key=T(f"attn.head{j}.W_key", d, d))
             for j in range(config.num_heads)]
    attention = MultiHeadSLFAttention(heads=heads,
                                      W_mix=T("attn.W_mix",
                                              config.num_heads, 1))
    count = GroupCountParams(
        w_cls=T("count.w_cls", config.k_max + 1, d),
        w_act_ctx=T("count.w_act_ctx", d, d),
        w_loc_ctx=T("count.w_loc_ctx", d, d),
        w_obj_ctx=T("count.w_obj_ctx", d, d),
        q_action=T("count.q_action", d),
        q_location=T("count.q_location", d),
        q_object=T("count.q_object", d))
    action = ActionHeadParams(w_out=T("action.w_out", d, 1),
                              w_slot=T("action.w_slot", d, d),
                              w_ctx=T("action.w_ctx", d, d))
    location = LocationHeadParams(w_out=T("location.w_out", d, 1),
                                  w_tok=T("location.w_tok", d, d),
                                  w_act=T("location.w_act", d, d),
                                  w_ctx=T("location.w_ctx", d, d),
                                  nil=T("location.nil", d))
    object_head = ObjectHeadParams(w_out=T("object.w_out", d, 1),
                                   w_tok=T("object.w_tok", d, d),
                                   w_act=T("object.w_act", d, d),
                                   w_loc=T("object.w_loc", d, d),
                                   w_ctx=T("object.w_ctx", d, d),
                                   nil=T("object.nil", d))
    frozen = set()
    if config.zero_query:
        frozen = {f"attn.head{j}.W_query" for j in range(config.num_heads)}
    return ModelParams(config=config, embedding_table=table,
                       dep_config=dep_config, nlc_layers=layers,
                       slot_encoder=slot, attention=attention, count=count,
                       action=action, location=location,
                       object_head=object_head, frozen=frozen)
