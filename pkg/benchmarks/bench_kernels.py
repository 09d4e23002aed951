"""Benchmark: compiled LSTM kernels vs the pure-numpy fallback.

Times the fused forward+backward pass at several widths and sequence
lengths, then one full training step (loss + gradients) with each
backend swapped in.  Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

import slfnet.kernels as kernels
from slfnet.kernels import reference

try:
    from slfnet.kernels import _lstm as compiled
except ImportError:
    compiled = None


def time_kernel(impl, d_in, hidden, length, repeats=200):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(d_in, length)))
    w = np.ascontiguousarray(rng.normal(size=(4 * hidden, d_in + hidden)) * 0.2)
    b = np.zeros(4 * hidden)
    grad = np.ascontiguousarray(rng.normal(size=(hidden, length)))
    impl.lstm_backward(grad, impl.lstm_forward(x, w, b, False)[1])  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        _, cache = impl.lstm_forward(x, w, b, False)
        impl.lstm_backward(grad, cache)
    return (time.perf_counter() - start) / repeats


def time_training_step(impl, repeats=20):
    from slfnet.data import GrammarConfig, build_vocab, generate_synthetic
    from slfnet.model import ModelParams
    from slfnet.training import TrainConfig, compute_loss
    from slfnet.autograd import ComputationRecord, backward

    saved = (kernels.lstm_forward, kernels.lstm_backward)
    kernels.lstm_forward = impl.lstm_forward
    kernels.lstm_backward = impl.lstm_backward
    try:
        config = TrainConfig(d=32, epochs=1, seed=5)
        examples = generate_synthetic(GrammarConfig(seed=5), 8)
        model = ModelParams.initialize(build_vocab(examples),
                                       config.model_config(), seed=5)
        params = model.trainable_parameters()
        start = time.perf_counter()
        for _ in range(repeats):
            for ex in examples:
                record = ComputationRecord()
                with record:
                    loss = compute_loss(ex, model, config)
                backward(loss, record, params)
        return (time.perf_counter() - start) / (repeats * len(examples))
    finally:
        kernels.lstm_forward, kernels.lstm_backward = saved


def main():
    print(f"active backend: {kernels.BACKEND}")
    if compiled is None:
        print("compiled extension not built; showing fallback only")
    sizes = [(16, 8, 8), (32, 16, 12), (32, 16, 24), (64, 32, 16)]
    print(f"{'d_in':>5} {'hidden':>7} {'L':>4} {'python us':>11} "
          f"{'compiled us':>12} {'speedup':>8}")
    for d_in, hidden, length in sizes:
        py = time_kernel(reference, d_in, hidden, length)
        if compiled is not None:
            cy = time_kernel(compiled, d_in, hidden, length)
            print(f"{d_in:>5} {hidden:>7} {length:>4} {py * 1e6:>11.1f} "
                  f"{cy * 1e6:>12.1f} {py / cy:>8.1f}x")
        else:
            print(f"{d_in:>5} {hidden:>7} {length:>4} {py * 1e6:>11.1f} "
                  f"{'-':>12} {'-':>8}")

    print("\nfull training step (loss + gradients, d=32):")
    py = time_training_step(reference)
    print(f"  python   {py * 1e3:8.2f} ms/example")
    if compiled is not None:
        cy = time_training_step(compiled)
        print(f"  compiled {cy * 1e3:8.2f} ms/example ({py / cy:.1f}x)")


if __name__ == "__main__":
    main()
