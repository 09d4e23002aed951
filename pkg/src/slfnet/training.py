"""Training objective, optimizer loop and checkpoint format.

The loss sums four weighted terms: cross-entropy on the group count,
mean binary cross-entropy over all action candidate spans (gold spans
positive), and pointer cross-entropies for each group's location and
object.  Pointer targets spread uniformly over the gold span, or sit on
the NIL sentinel when the slot is empty.  Location and object heads are
teacher-forced: they consume encodings of the gold action and gold
location during training.

Everything is deterministic given (dataset, config): parameter init,
per-epoch example order and the optimizer state all derive from the
config seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autograd import (ComputationRecord, Tensor, backward,
                       bce_with_logits_mean, cross_entropy_with_scores)
from .data import NLCExample, Span, build_vocab
from .encoders import dep_fused_encode, embed_tokens, span_encoding
from .errors import (CheckpointError, ConfigError, DataError,
                     DivergenceError)
from .heads import (action_candidate_logits, enumerate_action_candidates,
                    group_count_scores, location_scores, object_scores)
from .metrics import MetricsReport, evaluate
from .model import ModelConfig, ModelParams, build_model
from .rng import XorShift64Star

CHECKPOINT_VERSION = 1
_ORDER_SEED_SALT = 0xD1B54A32D192ED03


@dataclass
class TrainConfig:
    """Model width/depth plus optimizer settings, one flat surface."""

    d: int = 32
    num_layers: int = 2
    num_heads: int = 2
    k_max: int = 3
    max_span: int = 3
    beta: float = 0.5
    learning_rate: float = 0.005
    epochs: int = 100
    seed: int = 7
    lambda_count: float = 1.0
    lambda_action: float = 1.0
    lambda_location: float = 1.0
    lambda_object: float = 1.0
    interaction_mode: str = "learned"
    zero_query: bool = False

    def validate(self) -> None:
        self.model_config().validate()
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be finite and >= 0")
        for name in ("lambda_count", "lambda_action", "lambda_location",
                     "lambda_object"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(d=self.d, num_layers=self.num_layers,
                           num_heads=self.num_heads, k_max=self.k_max,
                           max_span=self.max_span, beta=self.beta,
                           interaction_mode=self.interaction_mode,
                           zero_query=self.zero_query)


def _pointer_target(span: Span | None, length: int) -> np.ndarray:
    target = np.zeros(length + 1)
    if span is None:
        target[length] = 1.0
    else:
        s, e = span
        target[s:e + 1] = 1.0 / (e - s + 1)
    return target


def compute_loss(example: NLCExample, model: ModelParams,
                 config: TrainConfig) -> Tensor:
    """Weighted four-term training loss for one example."""
    gold_k = len(example.groups)
    if gold_k > config.k_max:
        raise DataError(f"example {example.id}: {gold_k} gold groups exceed "
                        f"k_max = {config.k_max}")
    length = len(example.tokens)
    emb = embed_tokens(example.tokens, model.embedding_table)
    sent = dep_fused_encode(emb, example.dep_heads, model.dep_config,
                            model.nlc_layers)
    total = Tensor(0.0)

    if config.lambda_count > 0:
        target = np.zeros(config.k_max + 1)
        target[gold_k] = 1.0
        scores = group_count_scores(sent, model)
        total = total + config.lambda_count * cross_entropy_with_scores(
            scores, target)

    if config.lambda_action > 0:
        spans = enumerate_action_candidates(length, config.max_span)
        gold_actions = {g.action for g in example.groups}
        targets = np.array([1.0 if sp in gold_actions else 0.0
                            for sp in spans])
        logits = action_candidate_logits(emb, spans, sent, model)
        total = total + config.lambda_action * bce_with_logits_mean(
            logits, targets)

    if config.lambda_location > 0 or config.lambda_object > 0:
        for group in example.groups:
            action_enc = span_encoding(emb, group.action, model.slot_encoder)
            if config.lambda_location > 0:
                scores = location_scores(sent, action_enc, model)
                total = total + config.lambda_location * \
                    cross_entropy_with_scores(
                        scores, _pointer_target(group.location, length))
            if config.lambda_object > 0:
                if group.location is None:
                    loc_enc = model.object_head.nil
                else:
                    loc_enc = span_encoding(emb, group.location,
                                            model.slot_encoder)
                scores = object_scores(sent, action_enc, loc_enc, model)
                total = total + config.lambda_object * \
                    cross_entropy_with_scores(
                        scores, _pointer_target(group.object, length))
    return total


class Adam:
    """Per-parameter adaptive steps (first/second moment scaling)."""

    def __init__(self, params: dict[str, Tensor], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * (g * g)
            update = (self.lr / b1c) * m / (np.sqrt(v / b2c) + self.eps)
            # Rebind rather than mutate: gradient closures hold the old buffer.
            p.data = p.data - update


@dataclass
class EpochLog:
    epoch: int
    loss: float
    dev_accuracy: float
    dev_f: float

    def as_json_line(self) -> str:
        return json.dumps({"epoch": self.epoch, "loss": self.loss,
                           "dev_accuracy": self.dev_accuracy,
                           "dev_f": self.dev_f})


@dataclass
class TrainResult:
    best_model: ModelParams
    best_epoch: int
    final_model: ModelParams
    log: list[EpochLog] = field(default_factory=list)


def train(train_set: Sequence[NLCExample], dev_set: Sequence[NLCExample],
          config: TrainConfig,
          pretrained: np.ndarray | None = None) -> TrainResult:
    """Per-example gradient descent with dev metrics after each epoch.

    Keeps a snapshot of the epoch with the best dev accuracy (earliest
    epoch wins ties).  Aborts with a diagnostic if the loss goes
    non-finite.
    """
    config.validate()
    if len(train_set) == 0:
        raise DataError("training split is empty")
    for ex in train_set:
        if len(ex.groups) > config.k_max:
            raise DataError(f"example {ex.id}: {len(ex.groups)} gold groups "
                            f"exceed k_max = {config.k_max}")
    vocab = build_vocab(train_set)
    model = ModelParams.initialize(vocab, config.model_config(),
                                   seed=config.seed, pretrained=pretrained)
    model.train_config = config
    trainable = model.trainable_parameters()
    optimizer = Adam(trainable, config.learning_rate)
    order_rng = XorShift64Star(config.seed ^ _ORDER_SEED_SALT)

    best_model = model.clone()
    best_epoch = 0
    best_accuracy = -1.0
    log: list[EpochLog] = []
    for epoch in range(1, config.epochs + 1):
        order = list(range(len(train_set)))
        order_rng.shuffle(order)
        losses = []
        for idx in order:
            example = train_set[idx]
            record = ComputationRecord()
            with record:
                loss = compute_loss(example, model, config)
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergenceError(
                    f"epoch {epoch}, example {example.id}: loss became "
                    f"non-finite ({value})")
            grads = backward(loss, record, trainable)
            optimizer.step(grads)
            losses.append(value)
        mean_loss = math.fsum(losses) / len(losses)
        dev = (evaluate(model, dev_set) if dev_set
               else MetricsReport.from_counts(0, 0, 0, 0, 0))
        log.append(EpochLog(epoch=epoch, loss=mean_loss,
                            dev_accuracy=dev.accuracy, dev_f=dev.f_score))
        if dev.accuracy > best_accuracy:
            best_accuracy = dev.accuracy
            best_epoch = epoch
            best_model = model.clone()
    return TrainResult(best_model=best_model, best_epoch=best_epoch,
                       final_model=model, log=log)


def write_log(log: Sequence[EpochLog], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(entry.as_json_line())
            fh.write("\n")


def _fmt17(x: float) -> str:
    # 17 significant digits round-trip any finite float64 exactly.
    return format(float(x), ".17g")


def _train_config_of(model: ModelParams) -> TrainConfig:
    if model.train_config is not None:
        return model.train_config
    mc = model.config
    return TrainConfig(d=mc.d, num_layers=mc.num_layers,
                       num_heads=mc.num_heads, k_max=mc.k_max,
                       max_span=mc.max_span, beta=mc.beta,
                       interaction_mode=mc.interaction_mode,
                       zero_query=mc.zero_query)


def save_checkpoint(model: ModelParams, path) -> None:
    """Write the model as JSON: the full training-config snapshot, the
    vocabulary, and every parameter as {shape, row-major values} with
    17-significant-digit floats (exact float64 round-trip)."""
    config_doc = dataclasses.asdict(_train_config_of(model))
    vocab_list = [None] * len(model.vocab)
    for token, index in model.vocab.items():
        vocab_list[index] = token
    params = model.named_parameters()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('{"format_version": %d,\n' % CHECKPOINT_VERSION)
        fh.write('"config": %s,\n' % json.dumps(config_doc, sort_keys=True))
        fh.write('"vocab": %s,\n' % json.dumps(vocab_list))
        fh.write('"params": {\n')
        names = list(params)
        for i, name in enumerate(names):
            tensor = params[name]
            values = ",".join(_fmt17(v) for v in tensor.data.ravel())
            tail = "," if i + 1 < len(names) else ""
            fh.write('"%s": {"shape": %s, "values": [%s]}%s\n'
                     % (name, json.dumps(list(tensor.shape)), values, tail))
        fh.write("}}\n")


def load_checkpoint(path) -> ModelParams:
    """Rebuild a model from a checkpoint; shape problems name the
    parameter they concern."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: "
                              f"{err.msg}") from err
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported format_version {version!r}, "
                              f"expected {CHECKPOINT_VERSION}")
    cfg_doc = doc.get("config")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    if not isinstance(cfg_doc, dict) or set(cfg_doc) != known:
        raise CheckpointError("config section is malformed")
    train_config = TrainConfig(**cfg_doc)
    config = train_config.model_config()
    vocab_list = doc.get("vocab")
    if not isinstance(vocab_list, list):
        raise CheckpointError("vocab section is malformed")
    vocab = {token: i for i, token in enumerate(vocab_list)}
    stored = doc.get("params")
    if not isinstance(stored, dict):
        raise CheckpointError("params section is malformed")
    used = set()

    def source(name: str, shape: tuple[int, ...]) -> np.ndarray:
        entry = stored.get(name)
        if entry is None:
            raise CheckpointError(f"parameter {name}: missing from checkpoint")
        if list(entry.get("shape", [])) != list(shape):
            raise CheckpointError(
                f"parameter {name}: shape {entry.get('shape')} does not "
                f"match expected {list(shape)}")
        values = np.array(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(
                f"parameter {name}: {values.size} values for shape "
                f"{list(shape)}")
        used.add(name)
        return values.reshape(shape)

    model = build_model(vocab, config, source)
    extra = set(stored) - used
    if extra:
        raise CheckpointError(
            f"parameter {sorted(extra)[0]}: not part of this configuration")
    model.train_config = train_config
    return model
