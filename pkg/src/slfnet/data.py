"""Dataset schema, loading, splitting and the synthetic corpus generator.

Wire format is JSON Lines, one command per line::

    {"id": str, "tokens": [str], "dep_heads": [int],
     "groups": [{"action": [s, e], "location": [s, e]|null,
                 "object": [s, e]|null}]}

Spans are inclusive 0-based token indices.  ``dep_heads[i]`` is the
parent token of token i; the single root points at itself.  Dependency
parses are consumed as data, never computed here.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, DatasetError, DomainError
from .rng import XorShift64Star

Span = tuple[int, int]


@dataclass(frozen=True)
class SLFGroup:
    """One (action, location, object) triple of token spans.

    The action span is always present; location and object may be None
    when the command does not mention them.
    """

    action: Span
    location: Span | None = None
    object: Span | None = None


@dataclass
class NLCExample:
    """One natural-language command with its dependency parse and gold
    slot groups."""

    id: str
    tokens: list[str]
    dep_heads: list[int]
    groups: list[SLFGroup]


def _spans_overlap(a: Span, b: Span) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _check_span(span: Span, length: int, what: str) -> None:
    s, e = span
    if not (0 <= s <= e < length):
        raise DataError(f"{what} span [{s}, {e}] out of bounds for "
                        f"{length} tokens")


def validate_example(ex: NLCExample, k_max: int | None = None) -> None:
    """Raise DataError on any schema violation."""
    n = len(ex.tokens)
    if n == 0:
        raise DataError("tokens must be non-empty")
    if len(ex.dep_heads) != n:
        raise DataError(f"dep_heads has {len(ex.dep_heads)} entries for "
                        f"{n} tokens")
    for i, h in enumerate(ex.dep_heads):
        if not 0 <= h < n:
            raise DataError(f"dep_heads[{i}] = {h} out of range [0, {n})")
    roots = [i for i, h in enumerate(ex.dep_heads) if h == i]
    if len(roots) != 1:
        raise DataError(f"exactly one root required, found {len(roots)} "
                        f"self-loops")
    if k_max is not None and len(ex.groups) > k_max:
        raise DataError(f"{len(ex.groups)} groups exceed the limit {k_max}")
    actions = []
    for g, grp in enumerate(ex.groups, start=1):
        _check_span(grp.action, n, f"group {g} action")
        if grp.location is not None:
            _check_span(grp.location, n, f"group {g} location")
        if grp.object is not None:
            _check_span(grp.object, n, f"group {g} object")
        actions.append(grp.action)
    for i in range(len(actions)):
        for j in range(i + 1, len(actions)):
            if _spans_overlap(actions[i], actions[j]):
                raise DataError(
                    f"gold action spans {list(actions[i])} and "
                    f"{list(actions[j])} overlap")


def _span_from_json(value, line: int, what: str) -> Span | None:
    if value is None:
        return None
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) for v in value)):
        raise DatasetError(f"line {line}: {what} must be [start, end] or null")
    return (value[0], value[1])


def _example_from_json(obj: dict, line: int) -> NLCExample:
    for key in ("id", "tokens", "dep_heads", "groups"):
        if key not in obj:
            raise DatasetError(f"line {line}: missing field {key!r}")
    extra = set(obj) - {"id", "tokens", "dep_heads", "groups"}
    if extra:
        raise DatasetError(f"line {line}: unknown fields {sorted(extra)}")
    if not isinstance(obj["tokens"], list) or not all(
            isinstance(t, str) for t in obj["tokens"]):
        raise DatasetError(f"line {line}: tokens must be a list of strings")
    if not isinstance(obj["dep_heads"], list) or not all(
            isinstance(h, int) for h in obj["dep_heads"]):
        raise DatasetError(f"line {line}: dep_heads must be a list of ints")
    groups = []
    for g, grp in enumerate(obj["groups"], start=1):
        if not isinstance(grp, dict) or "action" not in grp:
            raise DatasetError(f"line {line}: group {g} needs an action span")
        unknown = set(grp) - {"action", "location", "object"}
        if unknown:
            raise DatasetError(f"line {line}: group {g} has unknown fields "
                               f"{sorted(unknown)}")
        action = _span_from_json(grp["action"], line, f"group {g} action")
        if action is None:
            raise DatasetError(f"line {line}: group {g} action cannot be null")
        groups.append(SLFGroup(
            action=action,
            location=_span_from_json(grp.get("location"), line,
                                     f"group {g} location"),
            object=_span_from_json(grp.get("object"), line,
                                   f"group {g} object")))
    return NLCExample(id=str(obj["id"]), tokens=list(obj["tokens"]),
                      dep_heads=list(obj["dep_heads"]), groups=groups)


def load_dataset(path, k_max: int | None = None) -> list[NLCExample]:
    """Read and fully validate a JSON-Lines dataset.

    Any failure names the one-based line number.
    """
    examples = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as err:
        raise DatasetError(f"cannot read dataset {path}: {err}") from err
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as err:
                raise DatasetError(
                    f"line {line_no}: malformed JSON: {err.msg}") from err
            ex = _example_from_json(obj, line_no)
            try:
                validate_example(ex, k_max=k_max)
            except DataError as err:
                raise DatasetError(f"line {line_no}: {err}") from err
            examples.append(ex)
    return examples


def example_to_json(ex: NLCExample) -> str:
    def span(sp):
        return None if sp is None else [sp[0], sp[1]]

    return json.dumps({
        "id": ex.id,
        "tokens": ex.tokens,
        "dep_heads": ex.dep_heads,
        "groups": [{"action": span(g.action), "location": span(g.location),
                    "object": span(g.object)} for g in ex.groups],
    })


def save_dataset(examples: Sequence[NLCExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(example_to_json(ex))
            fh.write("\n")


def split_dataset(examples: Sequence[NLCExample], seed: int
                  ) -> tuple[list[NLCExample], list[NLCExample],
                             list[NLCExample]]:
    """Deterministic 6:2:2 train/dev/test split.

    Examples are ordered by id before the seeded shuffle, so the split
    depends only on the id multiset and the seed, never on file order.
    Dev and test each get floor(n/5); the remainder goes to train.
    """
    n = len(examples)
    if n < 5:
        raise DomainError(f"need at least 5 examples to split, got {n}")
    ordered = sorted(examples, key=lambda e: e.id)
    XorShift64Star(seed).shuffle(ordered)
    n_dev = n // 5
    n_test = n // 5
    n_train = n - n_dev - n_test
    return (ordered[:n_train], ordered[n_train:n_train + n_dev],
            ordered[n_train + n_dev:])


@dataclass
class GrammarConfig:
    """Template grammar for the synthetic command corpus.

    Commands are k groups of ``<action> [the <object>] [in the
    <location>]`` joined by connector words.  ``k_weights[i]`` weights
    k = i + 1.
    """

    action_phrases: list[str] = field(default_factory=lambda: [
        "turn on", "turn off", "switch on", "switch off", "open", "close",
        "start", "stop", "dim", "brighten"])
    object_phrases: list[str] = field(default_factory=lambda: [
        "light", "fan", "heater", "tv", "radio", "door", "window", "music",
        "alarm", "projector"])
    location_phrases: list[str] = field(default_factory=lambda: [
        "kitchen", "bedroom", "garage", "office", "hallway", "living room",
        "bathroom", "basement"])
    connectors: list[str] = field(default_factory=lambda: [
        "and", "then", "and then"])
    k_weights: list[float] = field(default_factory=lambda: [0.5, 0.3, 0.2])
    p_omit_location: float = 0.3
    p_omit_object: float = 0.1
    seed: int = 7

    def validate(self) -> None:
        for name in ("action_phrases", "object_phrases", "location_phrases",
                     "connectors"):
            if not getattr(self, name):
                raise DomainError(f"{name} must be non-empty")
        for name in ("p_omit_location", "p_omit_object"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")
        if not self.k_weights or sum(self.k_weights) <= 0:
            raise DomainError("k_weights must sum to a positive value")
        if any(w < 0 for w in self.k_weights):
            raise DomainError("k_weights must be non-negative")


def generate_synthetic(config: GrammarConfig, n: int) -> list[NLCExample]:
    """Draw ``n`` commands from the template grammar, with dependency
    heads assigned by rule.

    Head rules: the first word of each action phrase heads that phrase
    and attaches to the previous group's action head (group 1's is the
    root); object and location phrases are headed by their last word,
    which attaches to the group's action head; determiners, prepositions
    and remaining phrase words attach to their phrase head; connectors
    attach to the previous group's action head.  The generator is a pure
    function of the config (xorshift64* stream), so output is identical
    across platforms.
    """
    config.validate()
    if n < 1:
        raise DomainError("need n >= 1 examples")
    rng = XorShift64Star(config.seed)
    examples = []
    for idx in range(n):
        tokens: list[str] = []
        heads: list[int] = []
        groups: list[SLFGroup] = []
        k = rng.weighted_index(config.k_weights) + 1
        prev_action_head = -1
        for g in range(k):
            if g > 0:
                for word in rng.choice(config.connectors).split():
                    tokens.append(word)
                    heads.append(prev_action_head)
            action_words = rng.choice(config.action_phrases).split()
            action_head = len(tokens)
            a_start = len(tokens)
            for j, word in enumerate(action_words):
                tokens.append(word)
                if j == 0:
                    heads.append(prev_action_head if g > 0 else action_head)
                else:
                    heads.append(action_head)
            a_span = (a_start, len(tokens) - 1)

            o_span = None
            if rng.uniform() >= config.p_omit_object:
                obj_words = rng.choice(config.object_phrases).split()
                o_start = len(tokens) + 1
                phrase_head = o_start + len(obj_words) - 1
                tokens.append("the")
                heads.append(phrase_head)
                for j, word in enumerate(obj_words):
                    tokens.append(word)
                    heads.append(action_head if o_start + j == phrase_head
                                 else phrase_head)
                o_span = (o_start, phrase_head)

            l_span = None
            if rng.uniform() >= config.p_omit_location:
                loc_words = rng.choice(config.location_phrases).split()
                l_start = len(tokens) + 2
                phrase_head = l_start + len(loc_words) - 1
                tokens.append("in")
                heads.append(phrase_head)
                tokens.append("the")
                heads.append(phrase_head)
                for j, word in enumerate(loc_words):
                    tokens.append(word)
                    heads.append(action_head if l_start + j == phrase_head
                                 else phrase_head)
                l_span = (l_start, phrase_head)

            groups.append(SLFGroup(action=a_span, location=l_span,
                                   object=o_span))
            prev_action_head = action_head
        ex = NLCExample(id=f"synth-{idx:06d}", tokens=tokens,
                        dep_heads=heads, groups=groups)
        validate_example(ex, k_max=len(config.k_weights))
        examples.append(ex)
    return examples


def k_histogram(examples: Sequence[NLCExample]) -> dict[int, int]:
    return dict(sorted(Counter(len(ex.groups) for ex in examples).items()))


def build_vocab(examples: Sequence[NLCExample]) -> dict[str, int]:
    """Token-to-index map with the unknown token reserved at 0."""
    vocab = {"<unk>": 0}
    for token in sorted({t for ex in examples for t in ex.tokens}):
        vocab[token] = len(vocab)
    return vocab


@dataclass
class PretrainedLoadReport:
    dimension: int
    found: list[str]
    missing: list[str]


def load_pretrained_vectors(path, vocab: dict[str, int], seed: int = 0
                            ) -> tuple[np.ndarray, PretrainedLoadReport]:
    """Read a whitespace text file of "token v1 ... vd" lines into a
    (V, d) table aligned with ``vocab``.

    Tokens absent from the file are initialized uniformly in [-0.1, 0.1]
    from the seed and listed in the report; the unknown token's row is
    zero.  A dimension change mid-file is an error naming the line.
    """
    file_vectors: dict[str, np.ndarray] = {}
    dim = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as err:
        raise DatasetError(f"cannot read vector file {path}: {err}") from err
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DatasetError(
                        f"line {line_no}: no vector values for "
                        f"token {token!r}")
            elif len(values) != dim:
                raise DatasetError(
                    f"line {line_no}: expected {dim} values, got "
                    f"{len(values)}")
            try:
                file_vectors[token] = np.array([float(v) for v in values])
            except ValueError as err:
                raise DatasetError(
                    f"line {line_no}: non-numeric vector value") from err
    if dim is None:
        raise DatasetError("line 1: vector file is empty")
    rng = XorShift64Star(seed)
    table = np.zeros((len(vocab), dim))
    found, missing = [], []
    for token, index in vocab.items():
        if index == 0:
            continue
        vec = file_vectors.get(token)
        if vec is not None:
            table[index] = vec
            found.append(token)
        else:
            table[index] = [rng.uniform_in(-0.1, 0.1) for _ in range(dim)]
            missing.append(token)
    return table, PretrainedLoadReport(dimension=dim, found=found,
                                       missing=missing)
