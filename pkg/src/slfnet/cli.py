"""Command-line surface.

Subcommands: gen-data, train, eval, predict, grad-check.  All
machine-readable output is JSON (or JSON Lines) on stdout.  Exit codes:
0 success, 1 check failure, 2 usage or data error, 3 numeric divergence.

Run configs are strict JSON documents with up to three sections::

    {"train": {...TrainConfig fields...},
     "grammar": {...GrammarConfig fields...},
     "paths": {"embeddings": "vectors.txt" | null}}

Unknown keys anywhere are rejected, and referenced paths are checked
before any work starts.  Every command is a pure function of its flags
and files; nothing reads clocks or ambient randomness.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .autograd import grad_check
from .data import (GrammarConfig, NLCExample, build_vocab, generate_synthetic,
                   k_histogram, load_dataset, load_pretrained_vectors,
                   save_dataset, split_dataset, validate_example)
from .decoder import decode, render_slf
from .errors import ConfigError, DataError, DivergenceError, SlfError
from .metrics import evaluate
from .model import ModelParams
from .training import (TrainConfig, compute_loss, load_checkpoint,
                       save_checkpoint, train, write_log)


@dataclasses.dataclass
class RunConfig:
    train: TrainConfig
    grammar: GrammarConfig
    embeddings_path: str | None = None


def _build_section(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"section {section!r}: unknown key {sorted(unknown)[0]!r}")
    try:
        return cls(**data)
    except TypeError as err:
        raise ConfigError(f"section {section!r}: {err}") from err


def load_run_config(path: str | None) -> RunConfig:
    """Parse a run-config file; with no path, all defaults apply."""
    if path is None:
        return RunConfig(train=TrainConfig(), grammar=GrammarConfig())
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path}: malformed JSON: {err.msg}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    unknown = set(doc) - {"train", "grammar", "paths"}
    if unknown:
        raise ConfigError(f"unknown config section {sorted(unknown)[0]!r}")
    cfg = RunConfig(
        train=_build_section(TrainConfig, doc.get("train", {}), "train"),
        grammar=_build_section(GrammarConfig, doc.get("grammar", {}),
                               "grammar"))
    paths = doc.get("paths", {})
    if not isinstance(paths, dict) or set(paths) - {"embeddings"}:
        raise ConfigError("section 'paths' accepts only the key 'embeddings'")
    emb = paths.get("embeddings")
    if emb is not None:
        if not isinstance(emb, str):
            raise ConfigError("paths.embeddings must be a string or null")
        if not os.path.exists(emb):
            raise ConfigError(f"paths.embeddings does not exist: {emb}")
        cfg.embeddings_path = emb
    cfg.train.validate()
    cfg.grammar.validate()
    return cfg


def cmd_gen_data(args) -> int:
    cfg = load_run_config(args.config)
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    examples = generate_synthetic(cfg.grammar, args.n)
    try:
        save_dataset(examples, args.out)
    except OSError as err:
        raise ConfigError(f"cannot write {args.out}: {err}") from err
    hist = {str(k): v for k, v in k_histogram(examples).items()}
    vocab_size = len({t for ex in examples for t in ex.tokens})
    print(json.dumps({"n": len(examples), "k_histogram": hist,
                      "vocab_size": vocab_size}))
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    examples = load_dataset(args.data, k_max=cfg.train.k_max)
    train_set, dev_set, test_set = split_dataset(examples, cfg.train.seed)
    pretrained = None
    if cfg.embeddings_path is not None:
        vocab = build_vocab(train_set)
        table, report = load_pretrained_vectors(cfg.embeddings_path, vocab,
                                                seed=cfg.train.seed)
        if report.dimension != cfg.train.d:
            raise ConfigError(
                f"pretrained vectors have dimension {report.dimension}, "
                f"model width is {cfg.train.d}")
        pretrained = table
    result = train(train_set, dev_set, cfg.train, pretrained=pretrained)
    os.makedirs(args.out, exist_ok=True)
    checkpoint_path = os.path.join(args.out, "checkpoint.json")
    log_path = os.path.join(args.out, "train_log.jsonl")
    save_checkpoint(result.best_model, checkpoint_path)
    write_log(result.log, log_path)
    best = result.log[result.best_epoch - 1]
    print(json.dumps({
        "checkpoint": checkpoint_path, "log": log_path,
        "epochs": len(result.log), "best_epoch": result.best_epoch,
        "best_dev_accuracy": best.dev_accuracy, "best_dev_f": best.dev_f,
        "train_size": len(train_set), "dev_size": len(dev_set),
        "test_size": len(test_set)}))
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    train_cfg = model.train_config
    examples = load_dataset(args.data, k_max=model.config.k_max)
    if args.split == "all":
        subset = examples
    else:
        train_set, dev_set, test_set = split_dataset(examples, train_cfg.seed)
        subset = {"train": train_set, "dev": dev_set,
                  "test": test_set}[args.split]
    report = evaluate(model, subset)
    print(json.dumps(report.as_dict()))
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.checkpoint)
    tokens = args.text.split()
    if not tokens:
        raise DataError("--text contains no tokens")
    try:
        heads = [int(part) for part in args.heads.split(",") if part != ""]
    except ValueError as err:
        raise DataError(f"--heads must be comma-separated integers: "
                        f"{args.heads!r}") from err
    if len(heads) != len(tokens):
        raise DataError(f"--heads supplies {len(heads)} entries for "
                        f"{len(tokens)} tokens")
    example = NLCExample(id="cli", tokens=tokens, dep_heads=heads, groups=[])
    validate_example(example)
    parse = decode(example, model)
    rendered = render_slf(parse, tokens)
    if rendered:
        print(rendered)
    if args.trace:
        trace = parse.trace
        print(json.dumps({
            "predicted_k": trace.predicted_k,
            "count_probs": list(trace.count_probs),
            "candidates": [list(sp) for sp in trace.candidates],
            "action_scores": list(trace.action_scores),
            "selected_actions": [list(sp) for sp in trace.selected_actions],
            "location_probs": [list(p) for p in trace.location_probs],
            "object_probs": [list(p) for p in trace.object_probs],
            "warnings": trace.warnings}))
    return 0


def cmd_grad_check(args) -> int:
    cfg = load_run_config(args.config)
    # A short fixed-shape probe command keeps the loss small, which is
    # what lets finite differences resolve near-zero gradients at all.
    probe = GrammarConfig(action_phrases=["turn on", "switch off"],
                          object_phrases=["light", "fan"],
                          location_phrases=["kitchen"], k_weights=[1.0],
                          p_omit_location=1.0, p_omit_object=0.0,
                          seed=args.seed)
    train_cfg = dataclasses.replace(cfg.train, d=8, seed=args.seed)
    example = generate_synthetic(probe, 1)[0]
    vocab = build_vocab([example])
    model = ModelParams.initialize(vocab, train_cfg.model_config(),
                                   seed=args.seed)
    params = model.trainable_parameters()

    def f(_params):
        return compute_loss(example, model, train_cfg)

    corrupt = None
    if args.corrupt_param is not None:
        corrupt = (args.corrupt_param, args.corrupt_delta)
        if args.corrupt_param not in params:
            raise ConfigError(f"unknown parameter {args.corrupt_param!r}")
    report = grad_check(f, params, step=args.step, tolerance=args.tolerance,
                        corrupt=corrupt, refine=True)
    for entry in report.entries:
        status = "PASS" if entry.passed else "FAIL"
        print(f"{status} {entry.name} max_rel_error={entry.max_rel_error:.3e}")
    if report.passed:
        print(json.dumps({"passed": True, "parameters": len(report.entries),
                          "max_rel_error": report.max_rel_error,
                          "tolerance": report.tolerance}))
        return 0
    worst = [e.name for e in report.failures()]
    print(json.dumps({"passed": False, "worst": worst,
                      "max_rel_error": report.max_rel_error,
                      "tolerance": report.tolerance}))
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slfnet",
        description="Slot-filling semantic parser for natural-language "
                    "commands")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train on a dataset (6:2:2 split)")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "dev", "test", "all"],
                   default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="parse one command")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--heads", required=True,
                   help="comma-separated dependency head per token "
                        "(root points at itself)")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("grad-check",
                       help="compare tape gradients of the full loss "
                            "against finite differences (width 8)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=3)
    # Large enough to beat float64 cancellation noise at near-zero
    # gradients; the Richardson refinement inside the checker handles
    # the truncation side.
    p.add_argument("--step", type=float, default=8e-3)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--corrupt-param", default=None,
                   help="fault-injection hook: offset this parameter's "
                        "analytic gradient (for testing the checker)")
    p.add_argument("--corrupt-delta", type=float, default=1e-2)
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except SlfError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
