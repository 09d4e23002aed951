"""Pure-numpy LSTM sequence kernels (fallback backend).

The compiled module in ``_lstm.pyx`` implements the same two functions
with identical semantics; this version is the behavioural reference and
is selected automatically when the extension is unavailable or when
``SLFNET_PURE_PYTHON`` is set.

Gate rows in the weight matrix are stacked [input; forget; cell; output],
each block ``h`` rows, applied to the concatenation [x_t; h_prev].
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def lstm_forward(x, w, b, reverse):
    """Run one LSTM direction over a (d_in, L) column sequence.

    Returns the (h, L) hidden-state matrix (indexed by position, not by
    processing step) and an opaque cache for the backward pass.
    """
    d_in, length = x.shape
    h4 = w.shape[0]
    h = h4 // 4
    gates = np.empty((h4, length))
    cells = np.empty((h, length))
    hidden = np.empty((h, length))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    xh = np.empty(d_in + h)
    for step in range(length):
        pos = length - 1 - step if reverse else step
        xh[:d_in] = x[:, pos]
        xh[d_in:] = h_prev
        z = w @ xh + b
        gi = _sigmoid(z[:h])
        gf = _sigmoid(z[h:2 * h])
        gg = np.tanh(z[2 * h:3 * h])
        go = _sigmoid(z[3 * h:])
        c_t = gf * c_prev + gi * gg
        h_t = go * np.tanh(c_t)
        gates[:h, pos] = gi
        gates[h:2 * h, pos] = gf
        gates[2 * h:3 * h, pos] = gg
        gates[3 * h:, pos] = go
        cells[:, pos] = c_t
        hidden[:, pos] = h_t
        h_prev = h_t
        c_prev = c_t
    cache = (x, w, gates, cells, hidden, reverse)
    return hidden, cache


def lstm_backward(grad_h, cache):
    """Backpropagate through one LSTM direction.

    ``grad_h`` is d(loss)/d(hidden) laid out by position.  Returns
    gradients for the input columns, the weight matrix and the bias.
    """
    x, w, gates, cells, hidden, reverse = cache
    d_in, length = x.shape
    h4 = w.shape[0]
    h = h4 // 4
    dx = np.zeros((d_in, length))
    dw = np.zeros_like(w)
    db = np.zeros(h4)
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    xh = np.empty(d_in + h)
    for step in range(length - 1, -1, -1):
        pos = length - 1 - step if reverse else step
        prev_pos = (length - step) if reverse else step - 1
        gi = gates[:h, pos]
        gf = gates[h:2 * h, pos]
        gg = gates[2 * h:3 * h, pos]
        go = gates[3 * h:, pos]
        tc = np.tanh(cells[:, pos])
        dh = grad_h[:, pos] + dh_next
        d_out = dh * tc
        dc = dh * go * (1.0 - tc * tc) + dc_next
        c_prev = cells[:, prev_pos] if step > 0 else np.zeros(h)
        dz = np.concatenate([
            dc * gg * gi * (1.0 - gi),
            dc * c_prev * gf * (1.0 - gf),
            dc * gi * (1.0 - gg * gg),
            d_out * go * (1.0 - go),
        ])
        xh[:d_in] = x[:, pos]
        xh[d_in:] = hidden[:, prev_pos] if step > 0 else 0.0
        dw += np.outer(dz, xh)
        db += dz
        dxh = w.T @ dz
        dx[:, pos] = dxh[:d_in]
        dh_next = dxh[d_in:]
        dc_next = dc * gf
    return dx, dw, db
