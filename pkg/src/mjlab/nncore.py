"""Dense-tensor neural network kernel on plain numpy.

Implements exactly the layers the policy networks need: valid-padding
convolution, batch normalization, ReLU, dropout, flatten, and dense,
with softmax cross-entropy training under SGD or Adam. Layers keep
their parameters but never cache activations on themselves, so
inference is a pure function of (model, input) and safe to share
across threads; training state (batch-norm running statistics,
optimizer moments) mutates only inside train-mode calls.

Models serialize to a single file: magic, version-tagged JSON header
describing the layer table, raw little-endian parameter blobs, and a
sha256 trailer so a truncated or corrupted file never half-loads.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MODEL_MAGIC = b"MJNN"
MODEL_VERSION = 1

# flip on to fail fast the moment any layer emits a non-finite value
DEBUG = False


def _init(rng, shape, fan_in, dtype):
    scale = np.sqrt(1.0 / fan_in)
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


class Conv2d:
    """Channels-first convolution, valid padding, no additive bias
    (a following batch-norm shift subsumes it)."""

    kind = "conv2d"

    def __init__(self, in_channels, out_channels, kernel, *,
                 padding="valid", rng=None, dtype=np.float32):
        if padding != "valid":
            raise ValueError(f"padding {padding!r} not supported")
        kh, kw = kernel
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = (kh, kw)
        self.padding = padding
        shape = (out_channels, in_channels, kh, kw)
        if rng is None:
            self.w = np.zeros(shape, dtype=dtype)
        else:
            self.w = _init(rng, shape, in_channels * kh * kw, dtype)

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels,
                "kernel": list(self.kernel), "padding": self.padding}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls(spec["in_channels"], spec["out_channels"],
                   spec["kernel"], padding=spec["padding"], dtype=dtype)

    def params(self):
        return {"w": self.w}

    def state(self):
        return {}

    def forward(self, x, *, train, rng):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"conv2d expects (n, {self.in_channels}, h, w) input, "
                f"got {x.shape}"
            )
        kh, kw = self.kernel
        n, _, h, w = x.shape
        if h < kh or w < kw:
            raise ValueError(
                f"conv2d kernel {self.kernel} does not fit input {x.shape}"
            )
        oh, ow = h - kh + 1, w - kw + 1
        cols = sliding_window_view(x, (kh, kw), axis=(2, 3))
        cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(
            n * oh * ow, self.in_channels * kh * kw
        )
        flat = cols @ self.w.reshape(self.out_channels, -1).T
        y = flat.reshape(n, oh, ow, self.out_channels)
        return y.transpose(0, 3, 1, 2), (x.shape, cols)

    def backward(self, dy, cache):
        (n, _, h, w), cols = cache
        kh, kw = self.kernel
        oh, ow = h - kh + 1, w - kw + 1
        flat = dy.transpose(0, 2, 3, 1).reshape(n * oh * ow,
                                                self.out_channels)
        dw = (flat.T @ cols).reshape(self.w.shape)
        dcols = flat @ self.w.reshape(self.out_channels, -1)
        dcols = dcols.reshape(n, oh, ow, self.in_channels, kh, kw)
        dcols = dcols.transpose(0, 3, 1, 2, 4, 5)
        dx = np.zeros((n, self.in_channels, h, w), dtype=dy.dtype)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + oh, j:j + ow] += dcols[:, :, :, :, i, j]
        return dx, {"w": dw}


class BatchNorm:
    """Per-channel normalization over every axis but the channel one,
    so the same layer serves NCHW maps and flat (n, features) input."""

    kind = "batch_norm"

    def __init__(self, channels, *, epsilon=1e-5, momentum=0.9,
                 dtype=np.float32):
        self.channels = channels
        self.epsilon = epsilon
        self.momentum = momentum
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def spec(self):
        return {"kind": self.kind, "channels": self.channels,
                "epsilon": self.epsilon, "momentum": self.momentum}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls(spec["channels"], epsilon=spec["epsilon"],
                   momentum=spec["momentum"], dtype=dtype)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def state(self):
        return {"running_mean": self.running_mean,
                "running_var": self.running_var}

    def _shaped(self, v, ndim):
        return v.reshape((1, self.channels) + (1,) * (ndim - 2))

    def forward(self, x, *, train, rng):
        if x.ndim < 2 or x.shape[1] != self.channels:
            raise ValueError(
                f"batch_norm expects {self.channels} channels on axis 1, "
                f"got {x.shape}"
            )
        axes = (0,) + tuple(range(2, x.ndim))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean[:] = m * self.running_mean + (1 - m) * mean
            self.running_var[:] = m * self.running_var + (1 - m) * var
        else:
            mean = self.running_mean
            var = self.running_var
        ivar = 1.0 / np.sqrt(var + self.epsilon)
        xc = x - self._shaped(mean, x.ndim)
        xhat = xc * self._shaped(ivar, x.ndim)
        y = xhat * self._shaped(self.gamma, x.ndim) + \
            self._shaped(self.beta, x.ndim)
        return y, (xc, ivar, xhat, axes, train)

    def backward(self, dy, cache):
        xc, ivar, xhat, axes, train = cache
        dgamma = (dy * xhat).sum(axis=axes)
        dbeta = dy.sum(axis=axes)
        dxhat = dy * self._shaped(self.gamma, dy.ndim)
        if not train:
            dx = dxhat * self._shaped(ivar, dy.ndim)
            return dx, {"gamma": dgamma, "beta": dbeta}
        m = dy.size // self.channels
        ivar_s = self._shaped(ivar, dy.ndim)
        dvar = (dxhat * xc).sum(axis=axes) * -0.5 * ivar ** 3
        dmean = -(dxhat * ivar_s).sum(axis=axes) - \
            dvar * 2.0 * xc.mean(axis=axes)
        dx = dxhat * ivar_s \
            + self._shaped(dvar, dy.ndim) * 2.0 * xc / m \
            + self._shaped(dmean, dy.ndim) / m
        return dx, {"gamma": dgamma, "beta": dbeta}


class ReLU:
    kind = "relu"

    def spec(self):
        return {"kind": self.kind}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls()

    def params(self):
        return {}

    def state(self):
        return {}

    def forward(self, x, *, train, rng):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache):
        return dy * cache, {}


class Dropout:
    kind = "dropout"

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} out of range")
        self.rate = rate

    def spec(self):
        return {"kind": self.kind, "rate": self.rate}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls(spec["rate"])

    def params(self):
        return {}

    def state(self):
        return {}

    def forward(self, x, *, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            rng = np.random.default_rng()
        keep = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        keep = keep.astype(x.dtype)
        return x * keep, keep

    def backward(self, dy, cache):
        if cache is None:
            return dy, {}
        return dy * cache, {}


class Flatten:
    kind = "flatten"

    def spec(self):
        return {"kind": self.kind}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls()

    def params(self):
        return {}

    def state(self):
        return {}

    def forward(self, x, *, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}


class Dense:
    kind = "dense"

    def __init__(self, in_features, out_features, *, rng=None,
                 dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            self.w = np.zeros((in_features, out_features), dtype=dtype)
        else:
            self.w = _init(rng, (in_features, out_features), in_features,
                           dtype)
        self.b = np.zeros(out_features, dtype=dtype)

    def spec(self):
        return {"kind": self.kind, "in_features": self.in_features,
                "out_features": self.out_features}

    @classmethod
    def from_spec(cls, spec, dtype):
        return cls(spec["in_features"], spec["out_features"], dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def state(self):
        return {}

    def forward(self, x, *, train, rng):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"dense expects (n, {self.in_features}) input, got {x.shape}"
            )
        return x @ self.w + self.b, x

    def backward(self, dy, cache):
        dw = cache.T @ dy
        db = dy.sum(axis=0)
        return dy @ self.w.T, {"w": dw, "b": db}


_LAYER_KINDS = {cls.kind: cls
                for cls in (Conv2d, BatchNorm, ReLU, Dropout, Flatten,
                            Dense)}


class Model:
    def __init__(self, layers, *, dtype=np.float32, meta=None):
        self.layers = list(layers)
        self.dtype = np.dtype(dtype)
        self.meta = dict(meta or {})


def policy_network(classes, *, seed=0, dtype=np.float32, meta=None,
                   planes=86, rows=34, cols=4):
    """Three valid-padding conv blocks into a 300-wide dense layer and
    a softmax head. The head starts zeroed so an untrained network
    answers with the uniform distribution."""
    rng = np.random.default_rng(seed)
    layers = []
    in_ch = planes
    for _ in range(3):
        layers += [
            Conv2d(in_ch, 100, (5, 2), rng=rng, dtype=dtype),
            BatchNorm(100, dtype=dtype),
            ReLU(),
            Dropout(0.5),
        ]
        in_ch = 100
        rows -= 4
        cols -= 1
    layers += [
        Flatten(),
        Dense(100 * rows * cols, 300, rng=rng, dtype=dtype),
        ReLU(),
        Dense(300, classes, dtype=dtype),
    ]
    return Model(layers, dtype=dtype, meta=meta)


def _run(model, x, *, train, rng):
    x = np.asarray(x, dtype=model.dtype)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    caches = []
    for i, layer in enumerate(model.layers):
        try:
            x, cache = layer.forward(x, train=train, rng=rng)
        except ValueError as exc:
            raise ValueError(f"layer {i}: {exc}") from None
        if DEBUG and not np.isfinite(x).all():
            raise ValueError(
                f"layer {i} ({layer.kind}) produced non-finite values"
            )
        caches.append(cache)
    return x, caches


def forward(model, batch, *, train=False, rng=None):
    """Logits for a batch; dropout and batch statistics only in train."""
    logits, _ = _run(model, batch, train=train, rng=rng)
    return logits


def softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def predict(model, batch):
    """Class distribution per row, from running statistics."""
    return softmax(forward(model, batch))


def _softmax_cross_entropy(logits, labels, dtype, weights=None):
    n, k = logits.shape
    if n == 0:
        raise ValueError("empty batch")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(
            f"label {labels[(labels < 0) | (labels >= k)][0]} outside "
            f"[0, {k})"
        )
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    if weights is None:
        share = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (n,) or (weights < 0).any():
            raise ValueError("weights must be one non-negative value "
                             "per sample")
        total = weights.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        share = weights / total
    loss = -(logp[np.arange(n), labels] * share).sum()
    dlogits = np.exp(logp) * share[:, None]
    dlogits[np.arange(n), labels] -= share
    return loss, dlogits.astype(dtype)


def cross_entropy(logits, labels, *, weights=None):
    """Mean cross-entropy of already-computed logits."""
    loss, _ = _softmax_cross_entropy(np.asarray(logits, dtype=np.float64),
                                     labels, np.float64, weights)
    return loss


def loss_and_grads(model, batch, labels, *, train=True, rng=None,
                   weights=None):
    """Mean cross-entropy and a per-layer gradient table. Optional
    per-sample weights turn the mean into a weighted mean."""
    logits, caches = _run(model, batch, train=train, rng=rng)
    loss, dy = _softmax_cross_entropy(logits, labels, model.dtype, weights)
    grads = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        dy, grads[i] = model.layers[i].backward(dy, caches[i])
    return loss, grads


class SGD:
    def __init__(self, lr=0.01, momentum=0.0):
        self.lr = lr
        self.momentum = momentum
        self.velocity = {}

    def step(self, model, grads):
        for i, layer_grads in enumerate(grads):
            params = model.layers[i].params()
            for name, g in layer_grads.items():
                p = params[name]
                if self.momentum:
                    v = self.velocity.setdefault(
                        (i, name), np.zeros_like(p)
                    )
                    v *= self.momentum
                    v += g
                    g = v
                p -= (self.lr * g).astype(p.dtype)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, model, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, layer_grads in enumerate(grads):
            params = model.layers[i].params()
            for name, g in layer_grads.items():
                p = params[name]
                m = self.m.setdefault((i, name), np.zeros_like(p))
                v = self.v.setdefault((i, name), np.zeros_like(p))
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                mhat = m / (1 - b1 ** self.t)
                vhat = v / (1 - b2 ** self.t)
                p -= (self.lr * mhat / (np.sqrt(vhat) + self.epsilon)
                      ).astype(p.dtype)


def train_step(model, optim, batch, labels, *, rng=None, weights=None):
    """One optimizer update; returns the pre-update batch loss."""
    loss, grads = loss_and_grads(model, batch, labels, train=True, rng=rng,
                                 weights=weights)
    optim.step(model, grads)
    return loss


# -------------------------------------------------------------- model files


_DTYPE_TAGS = {"<f4": np.float32, "<f8": np.float64}


def _blobs(model):
    for layer in model.layers:
        for group in (layer.params(), layer.state()):
            for name in sorted(group):
                yield group[name]


def save_model(model, path) -> None:
    header = {
        "version": MODEL_VERSION,
        "dtype": model.dtype.newbyteorder("<").str,
        "meta": model.meta,
        "layers": [layer.spec() for layer in model.layers],
    }
    head = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    body = bytearray()
    body += MODEL_MAGIC
    body += struct.pack("<I", len(head))
    body += head
    for arr in _blobs(model):
        body += np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder(
            "<")).tobytes()
    body += hashlib.sha256(bytes(body)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 40 or data[:4] != MODEL_MAGIC:
        raise ValueError("not a model file")
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise ValueError("model file checksum mismatch")
    head_len, = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8:8 + head_len].decode("utf-8"))
    if header["version"] != MODEL_VERSION:
        raise ValueError(
            f"model format version {header['version']} unsupported"
        )
    dtype = _DTYPE_TAGS.get(header["dtype"])
    if dtype is None:
        raise ValueError(f"model dtype {header['dtype']} unsupported")
    layers = []
    for spec in header["layers"]:
        cls = _LAYER_KINDS.get(spec["kind"])
        if cls is None:
            raise ValueError(f"unknown layer kind {spec['kind']!r}")
        layers.append(cls.from_spec(spec, dtype))
    model = Model(layers, dtype=dtype, meta=header["meta"])
    offset = 8 + head_len
    need = sum(arr.nbytes for arr in _blobs(model))
    if offset + need != len(data) - 32:
        raise ValueError("model file size does not match its layer table")
    for arr in _blobs(model):
        raw = np.frombuffer(data, dtype=arr.dtype.newbyteorder("<"),
                            count=arr.size, offset=offset)
        arr[...] = raw.reshape(arr.shape)
        offset += arr.nbytes
    return model
