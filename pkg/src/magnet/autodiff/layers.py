"""Neural building blocks on top of the tensor engine.

Everything here is shape-checked up front so that a mismatch fails with the
offending layer index rather than deep inside numpy, and every block exposes
``named_parameters`` so optimizers and checkpoints can reach its weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, InputError
from ..rng import RngStream
from .tensor import (
    DTYPE,
    Tensor,
    concat,
    dropout,
    grad_enabled,
    layer_norm_rows,
    matmul,
    narrow,
    parameter,
    relu,
    sigmoid,
    softmax_rows,
    tanh,
)

LAYER_KINDS = (
    "dense",
    "lstm-cell",
    "self-attention-encoder",
    "conv2d",
    "max-pool",
    "dropout",
    "relu",
    "tanh",
)

DEFAULT_DROPOUT_GRID = (0.0, 0.2, 0.4)


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer in a stack."""

    kind: str
    dims: tuple = ()
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise InputError(f"unknown layer kind {self.kind!r}")
        if any(d <= 0 for d in self.dims):
            raise InputError(f"layer dims must be positive, got {self.dims}")
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise InputError(f"dropout rate must lie in [0, 1], got {self.dropout_rate}")


def he_init(rng: RngStream, fan_in: int, shape) -> np.ndarray:
    return rng.generator.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(DTYPE)


def glorot_init(rng: RngStream, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.generator.uniform(-limit, limit, size=shape).astype(DTYPE)


class Dense:
    """Affine map (batch, in) -> (batch, out)."""

    def __init__(self, in_dim: int, out_dim: int, rng: RngStream, name: str = "dense", init: str = "he"):
        if init == "he":
            w = he_init(rng, in_dim, (in_dim, out_dim))
        elif init == "glorot":
            w = glorot_init(rng, in_dim, out_dim, (in_dim, out_dim))
        elif init == "small":
            w = rng.generator.normal(0.0, 1e-2, size=(in_dim, out_dim)).astype(DTYPE)
        else:
            raise InputError(f"unknown init {init!r}")
        self.W = parameter(w, name=f"{name}.W")
        self.b = parameter(np.zeros(out_dim, dtype=DTYPE), name=f"{name}.b")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise DimensionError(
                f"{self.name}: expected input (batch, {self.in_dim}), got {x.data.shape}"
            )
        if not grad_enabled():
            return Tensor(x.data @ self.W.data + self.b.data)
        return matmul(x, self.W) + self.b

    def parameters(self):
        return [self.W, self.b]


class LSTMCell:
    """A single LSTM step with fused gate weights (order: input, forget, cell, output)."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: RngStream, name: str = "lstm"):
        h = hidden_dim
        self.Wx = parameter(glorot_init(rng, input_dim, 4 * h, (input_dim, 4 * h)), name=f"{name}.Wx")
        self.Wh = parameter(glorot_init(rng, h, 4 * h, (h, 4 * h)), name=f"{name}.Wh")
        bias = np.zeros(4 * h, dtype=DTYPE)
        bias[h : 2 * h] = 1.0  # forget gate starts open
        self.b = parameter(bias, name=f"{name}.b")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.name = name

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        hd = self.hidden_dim
        for label, t, width in (("input", x, self.input_dim), ("hidden", h, hd), ("cell", c, hd)):
            if t.data.ndim != 2 or t.data.shape[1] != width:
                raise DimensionError(f"{self.name}: {label} state must be (batch, {width}), got {t.data.shape}")
        if not grad_enabled():
            g = x.data @ self.Wx.data + h.data @ self.Wh.data + self.b.data
            sig = 1.0 / (1.0 + np.exp(-g[:, : 2 * hd]))
            o = 1.0 / (1.0 + np.exp(-g[:, 3 * hd :]))
            cn = sig[:, hd:] * c.data + sig[:, :hd] * np.tanh(g[:, 2 * hd : 3 * hd])
            return Tensor(o * np.tanh(cn)), Tensor(cn)
        gates = matmul(x, self.Wx) + matmul(h, self.Wh) + self.b
        i = sigmoid(narrow(gates, 1, 0, hd))
        f = sigmoid(narrow(gates, 1, hd, hd))
        g = tanh(narrow(gates, 1, 2 * hd, hd))
        o = sigmoid(narrow(gates, 1, 3 * hd, hd))
        c_next = f * c + i * g
        h_next = o * tanh(c_next)
        return h_next, c_next

    def parameters(self):
        return [self.Wx, self.Wh, self.b]


def lstm_cell_step(cell: LSTMCell, hidden: Tensor, cell_state: Tensor, x: Tensor) -> tuple[Tensor, Tensor]:
    """One differentiable LSTM update returning (hidden', cell')."""
    return cell(x, hidden, cell_state)


class SelfAttentionEncoder:
    """One encoder block: multi-head scaled dot-product attention + FFN, both with residual + layer norm."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int, rng: RngStream, name: str = "attn"):
        if d_model % n_heads != 0:
            raise InputError(f"{name}: d_model {d_model} not divisible by heads {n_heads}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.name = name
        self.Wq = parameter(glorot_init(rng, d_model, d_model, (d_model, d_model)), name=f"{name}.Wq")
        self.Wk = parameter(glorot_init(rng, d_model, d_model, (d_model, d_model)), name=f"{name}.Wk")
        self.Wv = parameter(glorot_init(rng, d_model, d_model, (d_model, d_model)), name=f"{name}.Wv")
        self.Wo = parameter(glorot_init(rng, d_model, d_model, (d_model, d_model)), name=f"{name}.Wo")
        self.ln1_g = parameter(np.ones(d_model, dtype=DTYPE), name=f"{name}.ln1.g")
        self.ln1_b = parameter(np.zeros(d_model, dtype=DTYPE), name=f"{name}.ln1.b")
        self.ff1 = Dense(d_model, d_ff, rng.child("ff1"), name=f"{name}.ff1")
        self.ff2 = Dense(d_ff, d_model, rng.child("ff2"), name=f"{name}.ff2")
        self.ln2_g = parameter(np.ones(d_model, dtype=DTYPE), name=f"{name}.ln2.g")
        self.ln2_b = parameter(np.zeros(d_model, dtype=DTYPE), name=f"{name}.ln2.b")
        self.last_attention: np.ndarray | None = None

    def __call__(self, x: Tensor) -> Tensor:
        n, d = x.data.shape
        if d != self.d_model:
            raise DimensionError(f"{self.name}: token width {d} != model width {self.d_model}")
        if not grad_enabled():
            return Tensor(self._fast_forward(x.data))
        q = matmul(x, self.Wq)
        k = matmul(x, self.Wk)
        v = matmul(x, self.Wv)
        scale = 1.0 / np.sqrt(self.d_head)
        head_outs = []
        attn_maps = []
        for h in range(self.n_heads):
            lo = h * self.d_head
            qh = narrow(q, 1, lo, self.d_head)
            kh = narrow(k, 1, lo, self.d_head)
            vh = narrow(v, 1, lo, self.d_head)
            scores = matmul(qh, transpose_safe(kh)) * scale
            weights = softmax_rows(scores)
            attn_maps.append(weights.data)
            head_outs.append(matmul(weights, vh))
        self.last_attention = np.stack(attn_maps)
        attended = matmul(concat(head_outs, axis=1), self.Wo)
        x = layer_norm_rows(x + attended, self.ln1_g, self.ln1_b)
        ff = self.ff2(relu(self.ff1(x)))
        return layer_norm_rows(x + ff, self.ln2_g, self.ln2_b)

    def _fast_forward(self, x: np.ndarray) -> np.ndarray:
        dh = self.d_head
        q, k, v = x @ self.Wq.data, x @ self.Wk.data, x @ self.Wv.data
        scale = 1.0 / np.sqrt(dh)
        heads = []
        maps = []
        for h in range(self.n_heads):
            sl = slice(h * dh, (h + 1) * dh)
            scores = q[:, sl] @ k[:, sl].T * scale
            scores -= scores.max(axis=1, keepdims=True)
            e = np.exp(scores)
            w = e / e.sum(axis=1, keepdims=True)
            maps.append(w)
            heads.append(w @ v[:, sl])
        self.last_attention = np.stack(maps)
        att = np.concatenate(heads, axis=1) @ self.Wo.data

        def _ln(z, g, b):
            mu = z.mean(axis=1, keepdims=True)
            zc = z - mu
            return zc / np.sqrt((zc * zc).mean(axis=1, keepdims=True) + 1e-8) * g + b

        x = _ln(x + att, self.ln1_g.data, self.ln1_b.data)
        ff = np.maximum(x @ self.ff1.W.data + self.ff1.b.data, 0.0) @ self.ff2.W.data + self.ff2.b.data
        return _ln(x + ff, self.ln2_g.data, self.ln2_b.data)

    def parameters(self):
        return [
            self.Wq, self.Wk, self.Wv, self.Wo,
            self.ln1_g, self.ln1_b,
            *self.ff1.parameters(), *self.ff2.parameters(),
            self.ln2_g, self.ln2_b,
        ]


def transpose_safe(t: Tensor) -> Tensor:
    from .tensor import transpose

    return transpose(t)


def self_attention_encode(encoder: SelfAttentionEncoder, sequence) -> list[Tensor]:
    """Encode a token sequence; output length equals input length."""
    if isinstance(sequence, Tensor):
        if sequence.data.ndim != 2 or sequence.data.shape[0] == 0:
            raise InputError("self_attention_encode needs a non-empty (tokens, width) input")
        out = encoder(sequence)
        return [narrow(out, 0, i, 1) for i in range(out.data.shape[0])]
    if len(sequence) == 0:
        raise InputError("self_attention_encode called with an empty sequence")
    stacked = concat([t.reshape(1, -1) for t in sequence], axis=0)
    out = encoder(stacked)
    return [narrow(out, 0, i, 1).reshape(-1) for i in range(len(sequence))]


class Conv2D:
    """Valid (unpadded) 2-D convolution over (batch, H, W, C) inputs."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: RngStream, name: str = "conv"):
        fan_in = kernel * kernel * in_channels
        self.K = parameter(he_init(rng, fan_in, (kernel, kernel, in_channels, out_channels)), name=f"{name}.K")
        self.b = parameter(np.zeros(out_channels, dtype=DTYPE), name=f"{name}.b")
        self.kernel = kernel
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.K, self.b, name=self.name)

    def parameters(self):
        return [self.K, self.b]


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, name: str = "conv") -> Tensor:
    """im2col convolution; backward reconstructs dX by summing patch gradients."""
    from .tensor import _make

    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4:
        raise DimensionError(f"{name}: expected (batch, H, W, C) or (H, W, C), got {x.data.shape}")
    b, hh, ww, cin = xd.shape
    k, _, kcin, cout = kernels.data.shape
    if cin != kcin:
        raise DimensionError(f"{name}: input has {cin} channels, kernels expect {kcin}")
    if hh < k or ww < k:
        raise InputError(f"{name}: input {hh}x{ww} smaller than kernel {k}x{k}")
    ho, wo = hh - k + 1, ww - k + 1
    windows = np.lib.stride_tricks.sliding_window_view(xd, (k, k), axis=(1, 2))
    # windows: (b, ho, wo, cin, k, k) -> cols (b*ho*wo, k*k*cin)
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(b * ho * wo, k * k * cin)
    kmat = kernels.data.reshape(k * k * cin, cout)
    out = (cols @ kmat + bias.data).reshape(b, ho, wo, cout)
    if squeeze:
        out = out[0]

    def backward(g):
        gm = (g[None] if squeeze else g).reshape(b * ho * wo, cout)
        if bias.requires_grad:
            bias.accumulate_grad(gm.sum(axis=0))
        if kernels.requires_grad:
            kernels.accumulate_grad((cols.T @ gm).reshape(k, k, cin, cout))
        if x.requires_grad:
            dcols = (gm @ kmat.T).reshape(b, ho, wo, k, k, cin)
            dx = np.zeros_like(xd)
            for di in range(k):
                for dj in range(k):
                    dx[:, di : di + ho, dj : dj + wo, :] += dcols[:, :, :, di, dj, :]
            x.accumulate_grad(dx[0] if squeeze else dx)

    return _make(out, (x, kernels, bias), backward)


def max_pool2d(x: Tensor, pool: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/cols that do not fill a window are dropped."""
    from .tensor import _make

    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    b, hh, ww, c = xd.shape
    ho, wo = hh // pool, ww // pool
    if ho == 0 or wo == 0:
        raise InputError(f"max_pool2d: input {hh}x{ww} smaller than pool {pool}")
    trimmed = xd[:, : ho * pool, : wo * pool, :]
    blocks = trimmed.reshape(b, ho, pool, wo, pool, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, ho, wo, c, pool * pool)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    if squeeze:
        out = out[0]

    def backward(g):
        gb = g[None] if squeeze else g
        dblocks = np.zeros((b, ho, wo, c, pool * pool), dtype=DTYPE)
        np.put_along_axis(dblocks, arg[..., None], gb[..., None], axis=-1)
        dtrim = dblocks.reshape(b, ho, wo, c, pool, pool).transpose(0, 1, 4, 2, 5, 3).reshape(b, ho * pool, wo * pool, c)
        dx = np.zeros_like(xd)
        dx[:, : ho * pool, : wo * pool, :] = dtrim
        x.accumulate_grad(dx[0] if squeeze else dx)

    return _make(out, (x,), backward)


class MLP:
    """Dense stack with ReLU on hidden layers, linear output, optional dropout after hidden activations."""

    def __init__(
        self,
        in_dim: int,
        hidden: list[int],
        out_dim: int,
        rng: RngStream,
        name: str = "mlp",
        dropout_rate: float = 0.0,
        out_init: str = "glorot",
    ):
        self.layers: list[Dense] = []
        dims = [in_dim] + list(hidden) + [out_dim]
        for i in range(len(dims) - 1):
            last = i == len(dims) - 2
            self.layers.append(
                Dense(dims[i], dims[i + 1], rng.child(f"l{i}"), name=f"{name}.l{i}", init=out_init if last else "he")
            )
        self.dropout_rate = dropout_rate
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim

    def __call__(self, x: Tensor, rng: RngStream | None = None, train_mode: bool = False) -> Tensor:
        if not grad_enabled() and not (train_mode and self.dropout_rate > 0.0):
            h = x.data
            for i, layer in enumerate(self.layers):
                if h.shape[1] != layer.in_dim:
                    raise DimensionError(f"{self.name} layer {i}: expected width {layer.in_dim}, got {h.shape[1]}")
                h = h @ layer.W.data + layer.b.data
                if i < len(self.layers) - 1:
                    np.maximum(h, 0.0, out=h)
            return Tensor(h)
        h = x
        for i, layer in enumerate(self.layers):
            try:
                h = layer(h)
            except DimensionError as e:
                raise DimensionError(f"{self.name} layer {i}: {e}") from None
            if i < len(self.layers) - 1:
                h = relu(h)
                if self.dropout_rate > 0.0:
                    h = dropout(h, self.dropout_rate, rng, train_mode)
        return h

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def forward_mlp(mlp: MLP, x: Tensor, rng: RngStream | None = None, train_mode: bool = False) -> Tensor:
    """Run a dense stack; dropout is active only in train mode."""
    if train_mode and mlp.dropout_rate > 0.0 and rng is None:
        raise InputError("train-mode dropout requires an RngStream")
    return mlp(x, rng=rng, train_mode=train_mode)


def mlp_from_specs(specs: list[LayerSpec], rng: RngStream, name: str = "mlp") -> MLP:
    """Build a dense stack from LayerSpec entries (dense/dropout/relu/tanh kinds)."""
    dense_dims: list[tuple[int, int]] = []
    drop = 0.0
    for s in specs:
        if s.kind == "dense":
            if len(s.dims) != 2:
                raise InputError(f"dense spec needs (in, out) dims, got {s.dims}")
            dense_dims.append(s.dims)
        elif s.kind == "dropout":
            drop = s.dropout_rate
        elif s.kind in ("relu", "tanh"):
            continue
        else:
            raise InputError(f"mlp_from_specs cannot hold layer kind {s.kind!r}")
    if not dense_dims:
        raise InputError("mlp_from_specs needs at least one dense layer")
    for i in range(len(dense_dims) - 1):
        if dense_dims[i][1] != dense_dims[i + 1][0]:
            raise DimensionError(f"layer {i} output {dense_dims[i][1]} != layer {i + 1} input {dense_dims[i + 1][0]}")
    hidden = [d[1] for d in dense_dims[:-1]]
    return MLP(dense_dims[0][0], hidden, dense_dims[-1][1], rng, name=name, dropout_rate=drop)


class ConvPoolEncoder:
    """Convolution + 2x2 max-pool + flatten used to summarise an occupancy tensor."""

    def __init__(self, grid: int, channels: int, n_kernels: int, kernel: int, rng: RngStream, name: str = "enc"):
        if grid < kernel:
            raise InputError(f"{name}: grid {grid} smaller than kernel {kernel}")
        self.conv = Conv2D(channels, n_kernels, kernel, rng, name=f"{name}.conv")
        self.grid = grid
        self.channels = channels
        side = (grid - kernel + 1) // 2
        self.out_dim = side * side * n_kernels

    def __call__(self, state: Tensor) -> Tensor:
        pooled = max_pool2d(self.conv(state), 2)
        if pooled.data.ndim == 4:
            return pooled.reshape(pooled.data.shape[0], -1)
        return pooled.reshape(1, -1)

    def parameters(self):
        return self.conv.parameters()


def conv_pool_encode(encoder: ConvPoolEncoder, state: Tensor) -> Tensor:
    """Feature vector for one occupancy tensor (or a batch of them)."""
    return encoder(state)
