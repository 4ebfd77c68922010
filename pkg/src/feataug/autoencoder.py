"""Two-layer LSTM sequence autoencoder with a context-conditioned decoder.

The encoder reads a (optionally time-reversed) sequence; the top layer's last
hidden state is the context vector ``c``. The decoder is free-running: both
of its layers start from hidden state ``c`` (cell state zero), and at every
step its input is ``[y_{t-1}, c]`` with ``y_{-1} = 0``. Gradients are exact
BPTT through all of these paths.

Internally everything is time-major: sequences are ``(T, B, F)`` arrays.
Gate blocks are packed in the order input, forget, output, cell candidate,
so the three sigmoid gates are one contiguous slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .tensor import DimensionError, ParameterError, RandomStream, as_stream

INIT_SCALE = 0.08


class EmptyInputError(ValueError):
    pass


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LSTMLayerParams:
    W: np.ndarray  # (input_size, 4H)
    U: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def input_size(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U.shape[0]

    def check(self):
        H = self.hidden_size
        if self.U.shape != (H, 4 * H) or self.W.shape[1] != 4 * H or self.b.shape != (4 * H,):
            raise DimensionError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LSTMLayerParams":
        H = hidden_size
        return cls(np.zeros((input_size, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H))

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LSTMLayerParams":
        H = hidden_size
        W = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(input_size, 4 * H))
        U = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(H, 4 * H))
        b = rng.uniform(-INIT_SCALE, INIT_SCALE, size=4 * H)
        b[H:2 * H] += 1.0  # forget gate
        return cls(W, U, b)


@dataclass
class AutoencoderModel:
    n_features: int
    hidden: int
    encoder: list[LSTMLayerParams]
    decoder: list[LSTMLayerParams]
    W_out: np.ndarray  # (H, F)
    b_out: np.ndarray  # (F,)
    dropout: float = 0.2
    context_dropout: bool = True

    @classmethod
    def create(cls, n_features: int, hidden: int, stream: RandomStream | int | None = None,
               dropout: float = 0.2, context_dropout: bool = True) -> "AutoencoderModel":
        rng = as_stream(stream).child("init").rng
        F, H = n_features, hidden
        enc = [LSTMLayerParams.init(F, H, rng), LSTMLayerParams.init(H, H, rng)]
        dec = [LSTMLayerParams.init(F + H, H, rng), LSTMLayerParams.init(H, H, rng)]
        W_out = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(H, F))
        model = cls(F, H, enc, dec, W_out, np.zeros(F), dropout, context_dropout)
        model.check()
        return model

    @classmethod
    def zeros(cls, n_features: int, hidden: int, dropout: float = 0.2,
              context_dropout: bool = True) -> "AutoencoderModel":
        F, H = n_features, hidden
        enc = [LSTMLayerParams.zeros(F, H), LSTMLayerParams.zeros(H, H)]
        dec = [LSTMLayerParams.zeros(F + H, H), LSTMLayerParams.zeros(H, H)]
        return cls(F, H, enc, dec, np.zeros((H, F)), np.zeros(F), dropout, context_dropout)

    def check(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")
        for layer in self.encoder + self.decoder:
            layer.check()
        F, H = self.n_features, self.hidden
        expected = [F, H, F + H, H]
        for layer, n_in in zip(self.encoder + self.decoder, expected):
            if layer.input_size != n_in or layer.hidden_size != H:
                raise DimensionError("layer sizes do not match model header")
        if self.W_out.shape != (H, F) or self.b_out.shape != (F,):
            raise DimensionError("output projection shape mismatch")

    def params(self) -> dict[str, np.ndarray]:
        """Named parameter arrays (live references, in a fixed order)."""
        out = {}
        for prefix, layers in (("enc", self.encoder), ("dec", self.decoder)):
            for k, layer in enumerate(layers):
                out[f"{prefix}{k}.W"] = layer.W
                out[f"{prefix}{k}.U"] = layer.U
                out[f"{prefix}{k}.b"] = layer.b
        out["out.W"] = self.W_out
        out["out.b"] = self.b_out
        return out

    def copy(self) -> "AutoencoderModel":
        cp = lambda L: LSTMLayerParams(L.W.copy(), L.U.copy(), L.b.copy())
        return AutoencoderModel(self.n_features, self.hidden,
                                [cp(L) for L in self.encoder], [cp(L) for L in self.decoder],
                                self.W_out.copy(), self.b_out.copy(),
                                self.dropout, self.context_dropout)

    def n_params(self) -> int:
        return sum(p.size for p in self.params().values())


def lstm_cell_forward(x, state, params: LSTMLayerParams):
    """One LSTM step. ``state`` is ``(h, c)``; returns the new ``(h, c)``.

    Works on a single vector or on a leading batch axis.
    """
    h, c = state
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    H = params.hidden_size
    if x.shape[-1] != params.input_size or h.shape[-1] != H or c.shape[-1] != H:
        raise DimensionError("lstm_cell_forward: shape mismatch")
    z = x @ params.W + h @ params.U + params.b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    o = sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new



# ---------------------------------------------------------------------------
# batched forward with caches


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _draw_masks(stream: RandomStream, p: float, shape):
    return (stream.rng.random(shape) >= p) / (1.0 - p)


@dataclass
class _Masks:
    """Inverted-dropout multipliers; all ones outside train mode."""
    enc0: np.ndarray  # encoder layer-0 outputs feeding layer 1, (T, B, H)
    ctx: np.ndarray   # the context vector, (B, H)
    dec0: np.ndarray  # decoder layer-0 outputs feeding layer 1, (T_out, B, H)
    dec1: np.ndarray  # decoder layer-1 outputs feeding the projection; kept at ones


def _make_masks(model, T_in, T_out, B, train, stream) -> _Masks:
    H, p = model.hidden, model.dropout
    if not train or p == 0.0:
        return _Masks(np.ones((T_in, B, H)), np.ones((B, H)),
                      np.ones((T_out, B, H)), np.ones((T_out, B, H)))
    if stream is None:
        raise ParameterError("train-mode forward needs a RandomStream for dropout masks")
    enc0 = _draw_masks(stream, p, (T_in, B, H))
    ctx = _draw_masks(stream, p, (B, H)) if model.context_dropout else np.ones((B, H))
    dec0 = _draw_masks(stream, p, (T_out, B, H))
    # the projection output is fed back as the next decoder input; dropping
    # it makes training and generation diverge
    return _Masks(enc0, ctx, dec0, np.ones((T_out, B, H)))


@dataclass
class ForwardCache:
    x: np.ndarray          # encoder input (T, B, F), already reversed if requested
    enc: list              # per-layer (7, T, B, H) caches
    enc0_in1: np.ndarray   # dropped layer-0 outputs fed to encoder layer 1
    context_raw: np.ndarray
    context: np.ndarray    # after context dropout; what the decoder sees
    dec: list
    dec0_in1: np.ndarray
    dec1_out: np.ndarray   # dropped top decoder outputs fed to the projection
    y: np.ndarray          # decoder outputs (T_out, B, F)
    y_prev: np.ndarray     # decoder feedback inputs (T_out, B, F)
    masks: _Masks


def _run_layer(xs, layer: LSTMLayerParams):
    T, B, _ = xs.shape
    H = layer.hidden_size
    zx = _c(xs @ layer.W + layer.b)
    cache = np.empty((7, T, B, H))
    out = np.empty((T, B, H))
    zeros = np.zeros((B, H))
    _k.layer_forward(zx, _c(layer.U), zeros, zeros, cache, out)
    return out, cache


def _encode_tm(model, x, masks):
    h0, cache0 = _run_layer(x, model.encoder[0])
    in1 = h0 * masks.enc0
    h1, cache1 = _run_layer(in1, model.encoder[1])
    return h1[-1], [cache0, cache1], in1


def _decode_tm(model, context, T_out, masks):
    B = context.shape[0]
    F, H = model.n_features, model.hidden
    L0, L1 = model.decoder
    zc = _c(context @ L0.W[F:] + L0.b)
    caches = [np.empty((7, T_out, B, H)), np.empty((7, T_out, B, H))]
    y = np.empty((T_out, B, F))
    y_prev = np.empty((T_out, B, F))
    d0_all = np.empty((T_out, B, H))
    d1_all = np.empty((T_out, B, H))
    _k.decoder_forward(zc, _c(context), _c(L0.W[:F]), _c(L0.U), _c(L1.W), _c(L1.b), _c(L1.U),
                       _c(model.W_out), _c(model.b_out), _c(masks.dec0), _c(masks.dec1),
                       caches[0], caches[1], y, y_prev, d0_all, d1_all)
    return y, y_prev, caches, d0_all, d1_all


def _time_major(batch) -> np.ndarray:
    a = np.asarray(batch, dtype=np.float64)
    if a.ndim != 3:
        raise DimensionError(f"expected a (B, T, F) batch, got shape {a.shape}")
    return np.ascontiguousarray(a.transpose(1, 0, 2))


def _check_input(model, x):
    T, B, F = x.shape
    if T < 1 or B < 1:
        raise EmptyInputError("empty sequence")
    if F != model.n_features:
        raise DimensionError(f"feature dimension {F} != model's {model.n_features}")


def forward(model: AutoencoderModel, batch, reverse: bool = True, train: bool = False,
            stream: RandomStream | None = None, out_length: int | None = None) -> ForwardCache:
    """Full encode/decode pass over a ``(B, T, F)`` batch, keeping caches for backward."""
    x = _time_major(batch)
    _check_input(model, x)
    T, B, _ = x.shape
    T_out = T if out_length is None else out_length
    masks = _make_masks(model, T, T_out, B, train, stream)
    if reverse:
        x = np.ascontiguousarray(x[::-1])
    ctx_raw, enc_caches, enc0_in1 = _encode_tm(model, x, masks)
    ctx = ctx_raw * masks.ctx
    y, y_prev, dec_caches, d0, d1 = _decode_tm(model, ctx, T_out, masks)
    return ForwardCache(x, enc_caches, enc0_in1, ctx_raw, ctx, dec_caches, d0, d1, y, y_prev, masks)


def encode_batch(model: AutoencoderModel, batch, reverse: bool = True, train: bool = False,
                 stream: RandomStream | None = None) -> np.ndarray:
    """Contexts ``(B, H)`` for an equal-length batch ``(B, T, F)``."""
    x = _time_major(batch)
    _check_input(model, x)
    T, B, _ = x.shape
    masks = _make_masks(model, T, 0, B, train, stream)
    if reverse:
        x = np.ascontiguousarray(x[::-1])
    ctx, _, _ = _encode_tm(model, x, masks)
    return ctx * masks.ctx


def decode_batch(model: AutoencoderModel, contexts, length: int, train: bool = False,
                 stream: RandomStream | None = None) -> np.ndarray:
    """Decoded sequences ``(B, length, F)`` for contexts ``(B, H)``."""
    if length < 1:
        raise ParameterError("decode length must be >= 1")
    ctx = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    if ctx.shape[1] != model.hidden:
        raise DimensionError(f"context length {ctx.shape[1]} != model's {model.hidden}")
    masks = _make_masks(model, 0, length, ctx.shape[0], train, stream)
    y, *_ = _decode_tm(model, ctx, length, masks)
    return y.transpose(1, 0, 2)


def encode(model: AutoencoderModel, sequence, reverse: bool = True, train: bool = False,
           stream: RandomStream | None = None) -> np.ndarray:
    """Context vector of one ``(T, F)`` sequence (a 1-D input is one feature)."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.shape[0] == 0:
        raise EmptyInputError("cannot encode an empty sequence")
    return encode_batch(model, seq[None], reverse, train, stream)[0]


def decode(model: AutoencoderModel, context, length: int, train: bool = False,
           stream: RandomStream | None = None) -> np.ndarray:
    return decode_batch(model, np.asarray(context)[None], length, train, stream)[0]


def encode_sequences(model: AutoencoderModel, seqs, reverse: bool = True,
                     batch_size: int = 512) -> np.ndarray:
    """Eval-mode contexts for variable-length sequences, returned in input order."""
    seqs = [np.asarray(s, dtype=np.float64).reshape(len(s), -1) for s in seqs]
    out = np.empty((len(seqs), model.hidden))
    by_len: dict[int, list[int]] = {}
    for i, s in enumerate(seqs):
        by_len.setdefault(len(s), []).append(i)
    for idx in by_len.values():
        for j in range(0, len(idx), batch_size):
            chunk = idx[j:j + batch_size]
            out[chunk] = encode_batch(model, np.stack([seqs[i] for i in chunk]), reverse)
    return out


def decode_contexts(model: AutoencoderModel, contexts, lengths, batch_size: int = 512) -> list:
    """Eval-mode decodes of many contexts, each to its own length."""
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    out: list = [None] * len(contexts)
    by_len: dict[int, list[int]] = {}
    for i, n in enumerate(lengths):
        by_len.setdefault(int(n), []).append(i)
    for n, idx in by_len.items():
        for j in range(0, len(idx), batch_size):
            chunk = idx[j:j + batch_size]
            ys = decode_batch(model, contexts[chunk], n)
            for i, y in zip(chunk, ys):
                out[i] = y
    return out


def reconstruction_loss(pred, target) -> float:
    """Mean squared error over every timestep and feature."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


# ---------------------------------------------------------------------------
# backward


class Gradients(dict):
    """Parameter-name to gradient-array mapping, in ``model.params()`` order."""

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.values())


def _outer_sum(a, b):
    """``sum_{t,b} a[t,b,:]^T b[t,b,:]`` for time-major arrays."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _accumulate_layer(dZ, inputs, cache, layer_prefix, grads):
    grads[layer_prefix + ".W"] = _outer_sum(inputs, dZ)
    grads[layer_prefix + ".U"] = _outer_sum(cache[_k.H_PREV], dZ)
    grads[layer_prefix + ".b"] = dZ.sum(axis=(0, 1))


def _layer_backward(dh_out, cache, layer: LSTMLayerParams):
    T, B, H = dh_out.shape
    dZ = np.empty((T, B, 4 * H))
    _k.layer_backward(_c(dh_out), cache, _c(layer.U.T), dZ)
    return dZ


def backward_cache(model: AutoencoderModel, fc: ForwardCache, target) -> tuple[float, Gradients]:
    """Loss and exact gradients for a forward pass against a ``(B, T, F)`` target."""
    tgt = _time_major(target)
    if tgt.shape != fc.y.shape:
        raise DimensionError(f"target shape {tgt.shape} != output shape {fc.y.shape}")
    T_out, B, F = fc.y.shape
    H = model.hidden
    diff = fc.y - tgt
    loss = float(np.mean(diff * diff))
    dY = diff * (2.0 / diff.size)
    grads: dict[str, np.ndarray] = {}

    L0, L1 = model.decoder
    dZ0 = np.empty((T_out, B, 4 * H))
    dZ1 = np.empty((T_out, B, 4 * H))
    dY_total = np.empty_like(dY)
    dh0, dh1 = _k.decoder_backward(
        dY, fc.dec[0], fc.dec[1], _c(fc.masks.dec0), _c(fc.masks.dec1),
        _c(model.W_out.T), _c(L1.W.T), _c(L0.U.T), _c(L1.U.T), _c(L0.W[:F].T),
        dZ0, dZ1, dY_total)
    grads["out.W"] = _outer_sum(fc.dec1_out, dY_total)
    grads["out.b"] = dY_total.sum(axis=(0, 1))
    # the context reaches the decoder three ways: both seed states and every step's input
    sum_dZ0 = dZ0.sum(axis=0)
    d_ctx = sum_dZ0 @ L0.W[F:].T + dh0 + dh1
    grads["dec0.W"] = np.concatenate([_outer_sum(fc.y_prev, dZ0), fc.context.T @ sum_dZ0], axis=0)
    grads["dec0.U"] = _outer_sum(fc.dec[0][_k.H_PREV], dZ0)
    grads["dec0.b"] = sum_dZ0.sum(axis=0)
    _accumulate_layer(dZ1, fc.dec0_in1, fc.dec[1], "dec1", grads)

    T_in = fc.x.shape[0]
    dh_top = np.zeros((T_in, B, H))
    dh_top[-1] = d_ctx * fc.masks.ctx
    dZe1 = _layer_backward(dh_top, fc.enc[1], model.encoder[1])
    _accumulate_layer(dZe1, fc.enc0_in1, fc.enc[1], "enc1", grads)
    d_h0 = (dZe1 @ model.encoder[1].W.T) * fc.masks.enc0
    dZe0 = _layer_backward(d_h0, fc.enc[0], model.encoder[0])
    _accumulate_layer(dZe0, fc.x, fc.enc[0], "enc0", grads)

    return loss, Gradients((k, grads[k]) for k in model.params())


def loss_and_grads(model: AutoencoderModel, batch, reverse: bool = True, train: bool = False,
                   stream: RandomStream | None = None) -> tuple[float, Gradients]:
    """Reconstruction MSE of an equal-length batch and its exact gradients.

    The target is always the batch in its original time order.
    """
    batch = np.asarray(batch, dtype=np.float64)
    fc = forward(model, batch, reverse=reverse, train=train, stream=stream)
    return backward_cache(model, fc, batch)


def backward(model: AutoencoderModel, sequence, reverse: bool = True, train: bool = False,
             stream: RandomStream | None = None) -> Gradients:
    """Exact gradient of ``reconstruction_loss(decode(encode(x)), x)`` for one sequence."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    return loss_and_grads(model, seq[None], reverse=reverse, train=train, stream=stream)[1]
