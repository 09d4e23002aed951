"""Slot-filling semantic parser for natural-language commands.

A command is encoded by a dependency-fused BiLSTM, summarized per slot
type by multi-head attention, and decoded into k (action, location,
object) groups over a slot dependency graph.  All numerics run through
the package's own float64 tape autodiff; the LSTM inner loops ship as a
compiled extension with a pure-Python fallback (see ``slfnet.kernels``).
"""

from .autograd import (ComputationRecord, GradCheckReport, Tensor, backward,
                       grad_check)
from .data import (GrammarConfig, NLCExample, SLFGroup, build_vocab,
                   generate_synthetic, load_dataset, load_pretrained_vectors,
                   save_dataset, split_dataset)
from .decoder import (SLFParse, SemanticProbGraph, build_graph, decode,
                      render_slf, span_from_distribution)
from .metrics import MetricsReport, evaluate, score_predictions
from .model import ModelConfig, ModelParams
from .training import (TrainConfig, compute_loss, load_checkpoint,
                       save_checkpoint, train)

__version__ = "0.1.0"

__all__ = [
    "ComputationRecord", "GradCheckReport", "Tensor", "backward",
    "grad_check", "GrammarConfig", "NLCExample", "SLFGroup", "build_vocab",
    "generate_synthetic", "load_dataset", "load_pretrained_vectors",
    "save_dataset", "split_dataset", "SLFParse", "SemanticProbGraph",
    "build_graph", "decode", "render_slf", "span_from_distribution",
    "MetricsReport", "evaluate", "score_predictions", "ModelConfig",
    "ModelParams", "TrainConfig", "compute_loss", "load_checkpoint",
    "save_checkpoint", "train",
]
