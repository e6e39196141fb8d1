"""A small tanh MLP embedder with a softmax identity head.

Architecture: ``d_in -> h -> h -> d`` (tanh on both hidden layers, linear
embedding) followed by a bias-free classifier ``d -> C``.  Forward and
backward passes are written out by hand and operate on row batches.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionMismatch

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class EmbedderParams:
    w1: np.ndarray  # (h, d_in)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, h)
    b2: np.ndarray  # (h,)
    w3: np.ndarray  # (d, h)
    b3: np.ndarray  # (d,)
    wc: np.ndarray  # (C, d)

    @property
    def d_in(self):
        return self.w1.shape[1]

    @property
    def hidden(self):
        return self.w1.shape[0]

    @property
    def d(self):
        return self.w3.shape[0]

    @property
    def n_classes(self):
        return self.wc.shape[0]

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def map(self, fn, *others):
        return EmbedderParams(**{k: fn(v, *(o.arrays()[k] for o in others))
                                 for k, v in self.arrays().items()})

    def copy(self):
        return self.map(np.copy)

    def zeros_like(self):
        return self.map(np.zeros_like)

    def flat(self):
        return np.concatenate([v.ravel() for v in self.arrays().values()])

    def with_flat(self, vec):
        out, i = {}, 0
        for k, v in self.arrays().items():
            out[k] = np.asarray(vec[i:i + v.size], dtype=float).reshape(v.shape)
            i += v.size
        return EmbedderParams(**out)

    def equals(self, other):
        return all(np.array_equal(a, b) for a, b in zip(self.arrays().values(), other.arrays().values()))

    def to_dict(self):
        return {k: v.tolist() for k, v in self.arrays().items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**{f.name: np.asarray(data[f.name], dtype=float) for f in fields(cls)})


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    a1: np.ndarray          # tanh(z1)
    a2: np.ndarray          # tanh(z2)
    embedding: np.ndarray
    log_probs: np.ndarray


def init_params(d_in, hidden, d, n_classes, seed=0):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)

    def glorot(fan_out, fan_in):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_out, fan_in))

    return EmbedderParams(
        w1=glorot(hidden, d_in), b1=np.zeros(hidden),
        w2=glorot(hidden, hidden), b2=np.zeros(hidden),
        w3=glorot(d, hidden), b3=np.zeros(d),
        wc=glorot(n_classes, d),
    )


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward(params: EmbedderParams, inputs) -> ForwardTrace:
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != params.d_in:
        raise DimensionMismatch(f"input width {x.shape[1]} != d_in {params.d_in}")
    a1 = np.tanh(x @ params.w1.T + params.b1)
    a2 = np.tanh(a1 @ params.w2.T + params.b2)
    emb = a2 @ params.w3.T + params.b3
    return ForwardTrace(x, a1, a2, emb, _log_softmax(emb @ params.wc.T))


def embed(params, inputs, chunk=4096):
    """Embeddings only, computed in chunks for large sets."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if len(x) == 0:
        return np.zeros((0, params.d))
    return np.concatenate([forward(params, x[i:i + chunk]).embedding
                           for i in range(0, len(x), chunk)])


def backward(params: EmbedderParams, trace: ForwardTrace, d_embedding=None, d_log_probs=None):
    """Gradients of a scalar loss given its partials w.r.t. embeddings and log-probs.

    Upstream gradients are per instance (row-aligned with ``trace``); the
    returned gradients are summed over the batch.
    """
    n = len(trace.inputs)
    g_emb = np.zeros((n, params.d)) if d_embedding is None else np.asarray(d_embedding, dtype=float)
    g_lp = np.zeros((n, params.n_classes)) if d_log_probs is None else np.asarray(d_log_probs, dtype=float)
    if g_emb.shape != (n, params.d) or g_lp.shape != (n, params.n_classes):
        raise DimensionMismatch("upstream gradient shapes do not match the trace")

    probs = np.exp(trace.log_probs)
    g_logits = g_lp - probs * g_lp.sum(axis=1, keepdims=True)
    g_wc = g_logits.T @ trace.embedding
    g_emb = g_emb + g_logits @ params.wc

    g_w3 = g_emb.T @ trace.a2
    g_b3 = g_emb.sum(axis=0)
    g_z2 = (g_emb @ params.w3) * (1.0 - trace.a2 ** 2)
    g_w2 = g_z2.T @ trace.a1
    g_b2 = g_z2.sum(axis=0)
    g_z1 = (g_z2 @ params.w2) * (1.0 - trace.a1 ** 2)
    g_w1 = g_z1.T @ trace.inputs
    g_b1 = g_z1.sum(axis=0)
    return EmbedderParams(g_w1, g_b1, g_w2, g_b2, g_w3, g_b3, g_wc)


def sgd_step(params, grads, lr, momentum=0.9, weight_decay=0.0, state=None):
    """SGD with momentum, weight decay folded into the velocity.

    ``v <- momentum * v + grad + weight_decay * param``;
    ``param <- param - lr * v``.  Returns ``(new_params, new_state)``.
    """
    if state is None:
        state = params.zeros_like()
    velocity = state.map(lambda v, g, p: momentum * v + g + weight_decay * p, grads, params)
    new = params.map(lambda p, v: p - lr * v, velocity)
    return new, velocity


def checkpoint_dict(params, state=None):
    out = {"format_version": CHECKPOINT_FORMAT_VERSION, "params": params.to_dict()}
    if state is not None:
        out["velocity"] = state.to_dict()
    return out


def load_checkpoint_dict(data):
    if data.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {data.get('format_version')!r}")
    params = EmbedderParams.from_dict(data["params"])
    state = EmbedderParams.from_dict(data["velocity"]) if "velocity" in data else None
    return params, state
