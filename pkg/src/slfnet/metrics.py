"""Corpus metrics: exact-match accuracy plus slot-level precision,
recall and F-score.

Exact match compares the multiset of (action tokens, location tokens,
object tokens) triples, so group order never matters.  Slot counting
compares multisets of (slot type, span) pairs per example; empty
location/object slots contribute nothing to either side.  All zero
denominators resolve to 0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .data import NLCExample, SLFGroup
from .decoder import decode
from .model import ModelConfig, ModelParams


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    C: int          # exactly matched commands
    T: int          # total commands
    L_correct: int  # matched slot values
    P_pred: int     # predicted slot values
    R_gold: int     # gold slot values

    @classmethod
    def from_counts(cls, C: int, T: int, L_correct: int, P_pred: int,
                    R_gold: int) -> "MetricsReport":
        accuracy = C / T if T else 0.0
        precision = L_correct / P_pred if P_pred else 0.0
        recall = L_correct / R_gold if R_gold else 0.0
        f_score = (2.0 * precision * recall / (precision + recall)
                   if precision + recall else 0.0)
        return cls(accuracy=accuracy, precision=precision, recall=recall,
                   f_score=f_score, C=C, T=T, L_correct=L_correct,
                   P_pred=P_pred, R_gold=R_gold)

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f_score": self.f_score, "C": self.C,
                "T": self.T, "L_correct": self.L_correct,
                "P_pred": self.P_pred, "R_gold": self.R_gold}


def group_triples(groups: Sequence[SLFGroup],
                  tokens: Sequence[str]) -> Counter:
    """Multiset of token-text (action, location, object) triples."""
    def text(span):
        if span is None:
            return None
        return tuple(tokens[span[0]:span[1] + 1])

    return Counter((text(g.action), text(g.location), text(g.object))
                   for g in groups)


def slot_pairs(groups: Sequence[SLFGroup]) -> Counter:
    """Multiset of (slot type, span) pairs; empty slots are skipped."""
    pairs = Counter()
    for g in groups:
        pairs[("action", g.action)] += 1
        if g.location is not None:
            pairs[("location", g.location)] += 1
        if g.object is not None:
            pairs[("object", g.object)] += 1
    return pairs


def score_predictions(pairs: Sequence[tuple[Sequence[SLFGroup],
                                            Sequence[SLFGroup],
                                            Sequence[str]]]) -> MetricsReport:
    """Metrics over (predicted groups, gold groups, tokens) triples."""
    C = 0
    L_correct = P_pred = R_gold = 0
    for predicted, gold, tokens in pairs:
        if group_triples(predicted, tokens) == group_triples(gold, tokens):
            C += 1
        p = slot_pairs(predicted)
        g = slot_pairs(gold)
        L_correct += sum((p & g).values())
        P_pred += p.total()
        R_gold += g.total()
    return MetricsReport.from_counts(C=C, T=len(pairs), L_correct=L_correct,
                                     P_pred=P_pred, R_gold=R_gold)


def evaluate(model: ModelParams, examples: Sequence[NLCExample],
             config: ModelConfig | None = None) -> MetricsReport:
    """Decode every example and score the parses against gold."""
    pairs = []
    for ex in examples:
        parse = decode(ex, model, config)
        pairs.append((parse.groups, ex.groups, ex.tokens))
    return score_predictions(pairs)
