"""Compiled vs numpy LSTM kernels: same contract, near-identical floats."""

import numpy as np
import numpy.testing as npt
import pytest

import slfnet.kernels as kernels
from slfnet.kernels import reference

compiled = pytest.importorskip("slfnet.kernels._lstm",
                               reason="compiled extension not built")


def random_case(rng, d_in=6, hidden=4, length=5):
    x = np.ascontiguousarray(rng.normal(size=(d_in, length)))
    w = np.ascontiguousarray(rng.normal(size=(4 * hidden, d_in + hidden)) * 0.4)
    b = rng.normal(size=4 * hidden) * 0.1
    return x, w, b


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("reverse", [False, True])
def test_forward_agrees_with_reference(seed, reverse):
    rng = np.random.default_rng(seed)
    x, w, b = random_case(rng, d_in=3 + seed % 4, hidden=2 + seed % 3,
                          length=1 + seed % 6)
    h_ref, _ = reference.lstm_forward(x, w, b, reverse)
    h_cy, _ = compiled.lstm_forward(x, w, b, reverse)
    npt.assert_allclose(h_cy, h_ref, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("reverse", [False, True])
def test_backward_agrees_with_reference(seed, reverse):
    rng = np.random.default_rng(100 + seed)
    x, w, b = random_case(rng)
    grad = np.ascontiguousarray(rng.normal(size=(4, 5)))
    _, cache_ref = reference.lstm_forward(x, w, b, reverse)
    _, cache_cy = compiled.lstm_forward(x, w, b, reverse)
    out_ref = reference.lstm_backward(grad, cache_ref)
    out_cy = compiled.lstm_backward(grad, cache_cy)
    for a, b_ in zip(out_cy, out_ref):
        npt.assert_allclose(a, b_, rtol=1e-12, atol=1e-14)


def test_active_backend_exports_the_pair():
    assert kernels.BACKEND in ("compiled", "python")
    assert callable(kernels.lstm_forward)
    assert callable(kernels.lstm_backward)


def test_length_one_sequence():
    rng = np.random.default_rng(7)
    x, w, b = random_case(rng, length=1)
    for impl in (reference, compiled):
        h, cache = impl.lstm_forward(x, w, b, False)
        assert h.shape == (4, 1)
        assert np.all(np.isfinite(h))
        dx, dw, db = impl.lstm_backward(np.ones((4, 1)), cache)
        assert dx.shape == x.shape and dw.shape == w.shape


@pytest.mark.parametrize("impl_name", ["reference", "compiled"])
def test_kernel_gradients_match_finite_differences(impl_name):
    impl = {"reference": reference, "compiled": compiled}[impl_name]
    rng = np.random.default_rng(3)
    x, w, b = random_case(rng, d_in=4, hidden=3, length=4)
    cot = rng.normal(size=(3, 4))

    def loss(xv, wv, bv):
        h, _ = impl.lstm_forward(np.ascontiguousarray(xv),
                                 np.ascontiguousarray(wv), bv, True)
        return float(np.sum(h * cot))

    _, cache = impl.lstm_forward(x, w, b, True)
    dx, dw, db = impl.lstm_backward(np.ascontiguousarray(cot), cache)
    step = 1e-6
    for arr, grad, name in ((x, dx, "x"), (w, dw, "w"), (b, db, "b")):
        flat = arr.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = loss(x, w, b)
            flat[i] = orig - step
            fm = loss(x, w, b)
            flat[i] = orig
            num = (fp - fm) / (2 * step)
            assert abs(num - gflat[i]) <= 1e-6 * max(1.0, abs(num)), \
                (impl_name, name, i)
