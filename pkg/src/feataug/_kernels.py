"""Compiled recurrent loops for the autoencoder.

Per-layer caches are ``(7, T, B, H)`` arrays holding, per step, the input,
forget and output gates, the cell candidate, the previous cell state, the
tanh of the new cell state and the previous hidden state. Every matrix
handed in must be C-contiguous.
"""

import math

import numpy as np
from numba import njit

I_GATE, F_GATE, O_GATE, G_CAND, C_PREV, TANH_C, H_PREV = range(7)


@njit(cache=True, inline="always")
def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True, inline="always")
def _tanh(x):
    # libm tanh is ~3x slower than exp here; absolute error stays ~1e-16
    return 2.0 / (1.0 + math.exp(-2.0 * x)) - 1.0


@njit(cache=True)
def _cell_fwd(z, h, c, cache, t, H):
    """Advance ``h`` and ``c`` in place from pre-activations ``z``."""
    B = z.shape[0]
    for b in range(B):
        for k in range(H):
            i = _sig(z[b, k])
            f = _sig(z[b, H + k])
            o = _sig(z[b, 2 * H + k])
            g = _tanh(z[b, 3 * H + k])
            cn = f * c[b, k] + i * g
            tc = _tanh(cn)
            cache[I_GATE, t, b, k] = i
            cache[F_GATE, t, b, k] = f
            cache[O_GATE, t, b, k] = o
            cache[G_CAND, t, b, k] = g
            cache[C_PREV, t, b, k] = c[b, k]
            cache[TANH_C, t, b, k] = tc
            cache[H_PREV, t, b, k] = h[b, k]
            c[b, k] = cn
            h[b, k] = o * tc


@njit(cache=True)
def _cell_bwd(dh, dc, cache, t, H, dz):
    """Pre-activation gradients into ``dz``; ``dc`` becomes the gradient on the previous cell."""
    B = dh.shape[0]
    for b in range(B):
        for k in range(H):
            i = cache[I_GATE, t, b, k]
            f = cache[F_GATE, t, b, k]
            o = cache[O_GATE, t, b, k]
            g = cache[G_CAND, t, b, k]
            tc = cache[TANH_C, t, b, k]
            dct = dc[b, k] + dh[b, k] * o * (1.0 - tc * tc)
            dz[b, k] = dct * g * i * (1.0 - i)
            dz[b, H + k] = dct * cache[C_PREV, t, b, k] * f * (1.0 - f)
            dz[b, 2 * H + k] = dh[b, k] * tc * o * (1.0 - o)
            dz[b, 3 * H + k] = dct * i * (1.0 - g * g)
            dc[b, k] = dct * f


@njit(cache=True)
def layer_forward(zx, U, h0, c0, cache, out):
    T = zx.shape[0]
    H = U.shape[0]
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        z = zx[t] + h @ U
        _cell_fwd(z, h, c, cache, t, H)
        out[t] = h


@njit(cache=True)
def layer_backward(dh_out, cache, UT, dZ):
    """BPTT through one layer; returns the gradient on its initial hidden state."""
    T, B, H = dh_out.shape
    dh_rec = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        _cell_bwd(dh_out[t] + dh_rec, dc, cache, t, H, dZ[t])
        dh_rec = dZ[t] @ UT
    return dh_rec


@njit(cache=True)
def decoder_forward(zc, ctx, W_y, U0, W1, b1, U1, W_out, b_out, m0, m1,
                    cache0, cache1, y, y_prev, d0_all, d1_all):
    T, B, F = y.shape
    H = U0.shape[0]
    h0 = ctx.copy()
    h1 = ctx.copy()
    c0 = np.zeros((B, H))
    c1 = np.zeros((B, H))
    yp = np.zeros((B, F))
    for t in range(T):
        y_prev[t] = yp
        z0 = zc + yp @ W_y + h0 @ U0
        _cell_fwd(z0, h0, c0, cache0, t, H)
        d0 = h0 * m0[t]
        d0_all[t] = d0
        z1 = d0 @ W1 + b1 + h1 @ U1
        _cell_fwd(z1, h1, c1, cache1, t, H)
        d1 = h1 * m1[t]
        d1_all[t] = d1
        yp = d1 @ W_out + b_out
        y[t] = yp


@njit(cache=True)
def decoder_backward(dY, cache0, cache1, m0, m1, W_outT, W1T, U0T, U1T, W_yT,
                     dZ0, dZ1, dY_total):
    """Returns gradients on the two decoder seed states."""
    T, B, F = dY.shape
    H = U0T.shape[1]
    dh0 = np.zeros((B, H))
    dc0 = np.zeros((B, H))
    dh1 = np.zeros((B, H))
    dc1 = np.zeros((B, H))
    dy_fb = np.zeros((B, F))
    for t in range(T - 1, -1, -1):
        dy = dY[t] + dy_fb
        dY_total[t] = dy
        dd1 = (dy @ W_outT) * m1[t]
        _cell_bwd(dd1 + dh1, dc1, cache1, t, H, dZ1[t])
        dh1 = dZ1[t] @ U1T
        dd0 = (dZ1[t] @ W1T) * m0[t]
        _cell_bwd(dd0 + dh0, dc0, cache0, t, H, dZ0[t])
        dh0 = dZ0[t] @ U0T
        dy_fb = dZ0[t] @ W_yT
    return dh0, dh1
