# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels (hot path).

Same contract as ``reference.py``: gate rows stacked [input; forget;
cell; output] applied to [x_t; h_prev]; hidden states indexed by
position.  Results may differ from the numpy fallback only in the last
few ulps (summation order differs from BLAS).
"""

from libc.math cimport exp, tanh

import numpy as np


cdef inline double _sig(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def lstm_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b,
                 bint reverse):
    cdef Py_ssize_t d_in = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t h4 = w.shape[0]
    cdef Py_ssize_t h = h4 // 4
    cdef Py_ssize_t step, pos, j, k
    cdef double acc, gi, gf, gg, go, cc

    gates_np = np.empty((h4, length))
    cells_np = np.empty((h, length))
    hidden_np = np.empty((h, length))
    z_np = np.empty(h4)
    hprev_np = np.zeros(h)
    cprev_np = np.zeros(h)

    cdef double[:, ::1] gates = gates_np
    cdef double[:, ::1] cells = cells_np
    cdef double[:, ::1] hidden = hidden_np
    cdef double[::1] z = z_np
    cdef double[::1] hprev = hprev_np
    cdef double[::1] cprev = cprev_np

    with nogil:
        for step in range(length):
            pos = length - 1 - step if reverse else step
            for j in range(h4):
                acc = b[j]
                for k in range(d_in):
                    acc += w[j, k] * x[k, pos]
                for k in range(h):
                    acc += w[j, d_in + k] * hprev[k]
                z[j] = acc
            for j in range(h):
                gi = _sig(z[j])
                gf = _sig(z[h + j])
                gg = tanh(z[2 * h + j])
                go = _sig(z[3 * h + j])
                cc = gf * cprev[j] + gi * gg
                gates[j, pos] = gi
                gates[h + j, pos] = gf
                gates[2 * h + j, pos] = gg
                gates[3 * h + j, pos] = go
                cells[j, pos] = cc
                hidden[j, pos] = go * tanh(cc)
            for j in range(h):
                hprev[j] = hidden[j, pos]
                cprev[j] = cells[j, pos]

    cache = (np.asarray(x), np.asarray(w), gates_np, cells_np, hidden_np,
             bool(reverse))
    return hidden_np, cache


def lstm_backward(double[:, ::1] grad_h, cache):
    x_np, w_np, gates_np, cells_np, hidden_np, rev = cache
    cdef bint reverse = rev
    cdef double[:, ::1] x = x_np
    cdef double[:, ::1] w = w_np
    cdef double[:, ::1] gates = gates_np
    cdef double[:, ::1] cells = cells_np
    cdef double[:, ::1] hidden = hidden_np

    cdef Py_ssize_t d_in = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t h4 = w.shape[0]
    cdef Py_ssize_t h = h4 // 4
    cdef Py_ssize_t step, pos, prev_pos, j, k
    cdef double gi, gf, gg, go, tc, dh, d_out, dc, c_prev, di, df, dg, acc, zj

    dx_np = np.zeros((d_in, length))
    dw_np = np.zeros((h4, d_in + h))
    db_np = np.zeros(h4)
    dz_np = np.empty(h4)
    dhn_np = np.zeros(h)
    dcn_np = np.zeros(h)

    cdef double[:, ::1] dx = dx_np
    cdef double[:, ::1] dw = dw_np
    cdef double[::1] db = db_np
    cdef double[::1] dz = dz_np
    cdef double[::1] dhn = dhn_np
    cdef double[::1] dcn = dcn_np

    with nogil:
        for step in range(length - 1, -1, -1):
            pos = length - 1 - step if reverse else step
            prev_pos = (length - step) if reverse else step - 1
            for j in range(h):
                gi = gates[j, pos]
                gf = gates[h + j, pos]
                gg = gates[2 * h + j, pos]
                go = gates[3 * h + j, pos]
                tc = tanh(cells[j, pos])
                dh = grad_h[j, pos] + dhn[j]
                d_out = dh * tc
                dc = dh * go * (1.0 - tc * tc) + dcn[j]
                c_prev = cells[j, prev_pos] if step > 0 else 0.0
                di = dc * gg
                df = dc * c_prev
                dg = dc * gi
                dz[j] = di * gi * (1.0 - gi)
                dz[h + j] = df * gf * (1.0 - gf)
                dz[2 * h + j] = dg * (1.0 - gg * gg)
                dz[3 * h + j] = d_out * go * (1.0 - go)
                dcn[j] = dc * gf
            for j in range(h4):
                zj = dz[j]
                db[j] += zj
                for k in range(d_in):
                    dw[j, k] += zj * x[k, pos]
                if step > 0:
                    for k in range(h):
                        dw[j, d_in + k] += zj * hidden[k, prev_pos]
            for k in range(d_in):
                acc = 0.0
                for j in range(h4):
                    acc += w[j, k] * dz[j]
                dx[k, pos] = acc
            for k in range(h):
                acc = 0.0
                for j in range(h4):
                    acc += w[j, d_in + k] * dz[j]
                dhn[k] = acc

    return dx_np, dw_np, db_np
