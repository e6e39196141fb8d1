"""Two-stage GLRTML training.

Stage 1 pretrains the embedder on the identity (softmax) loss alone.
Stage 2 alternates, once per epoch, between re-estimating the hypothesis
model on the full training set and mini-batch descent on the full loss with
that model frozen.  A final model is estimated after the last epoch.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import embedder as emb
from .errors import InvalidConfig
from .glrt_gmm import GmmModel, em_fit, symmetrize
from .glrt_mg import DEFAULT_CLIP_EPS, DEFAULT_CLIP_MODE, DEFAULT_RIDGE_REL, fit_mg_model
from .loss import LossConfig, batch_loss_and_grads, identity_loss, identity_loss_grad, total_loss
from .numerics import ClipMode
from .pairs import all_pairs, pair_diffs, sample_pairs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    t0: int = 100
    t1_minus_t0: int = 50
    batch_size: int = 64
    lr_stage1: float = 0.05
    lr_stage2: float = 0.005
    momentum: float = 0.9
    weight_decay: float = 0.0005
    d: int = 64
    hidden: int = 64
    seed: int = 0
    variant: str = "mg"
    k1: int = 1
    k0: int = 1
    diagonal: bool = False
    clip_mode: ClipMode = DEFAULT_CLIP_MODE
    clip_eps: float = DEFAULT_CLIP_EPS
    ridge_rel: float = DEFAULT_RIDGE_REL
    pair_budget: int = 50_000
    em_max_iters: int = 100
    em_tol: float = 1e-6
    loss: LossConfig = field(default_factory=LossConfig)

    def validate(self):
        if self.t0 < 0 or self.t1_minus_t0 < 0:
            raise InvalidConfig("epoch counts must be non-negative")
        if self.batch_size < 2:
            raise InvalidConfig("batch_size must be >= 2")
        if min(self.d, self.hidden, self.pair_budget) < 1:
            raise InvalidConfig("d, hidden and pair_budget must be positive")
        if self.variant not in ("mg", "gmm"):
            raise InvalidConfig(f"unknown variant {self.variant!r}")
        if self.k1 < 1 or self.k0 < 1:
            raise InvalidConfig("mixture component counts must be >= 1")
        ClipMode(self.clip_mode)


@dataclass
class EpochRecord:
    epoch: int
    stage: int
    mean_pair_loss: float
    mean_identity_loss: float
    mean_total_loss: float
    wall_ms: float = 0.0
    model_summary: dict = field(default_factory=dict)

    def to_dict(self, timing=True):
        out = asdict(self)
        if not timing:
            out.pop("wall_ms")
        return out


@dataclass
class TrainReport:
    epochs: list
    params: emb.EmbedderParams
    model: object


def _labeled(features, labels):
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    keep = y >= 0
    return x[keep], y[keep]


def _class_index(labels):
    classes = np.unique(labels)
    return classes, np.searchsorted(classes, labels)


def build_batch_pairs(labels):
    """All unordered same-label pairs as positives, the rest as negatives."""
    return all_pairs(labels)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) >= 2:
            yield idx


def train_stage1(features, labels, cfg: TrainConfig, params=None, records=None):
    """Identity-loss pretraining; returns the embedder parameters."""
    cfg.validate()
    x, y = _labeled(features, labels)
    classes, yi = _class_index(y)
    if len(classes) < 2:
        raise InvalidConfig("stage 1 needs at least two classes")
    if params is None:
        params = emb.init_params(x.shape[1], cfg.hidden, cfg.d, len(classes), seed=cfg.seed)
    rng = np.random.default_rng([cfg.seed, 1])
    state = None
    for epoch in range(cfg.t0):
        t_start = time.perf_counter()
        losses = []
        for idx in _batches(len(x), cfg.batch_size, rng):
            trace = emb.forward(params, x[idx])
            id_loss = identity_loss(trace.log_probs, yi[idx])
            g_lp = identity_loss_grad(trace.log_probs, yi[idx])
            grads = emb.backward(params, trace, None, g_lp)
            params, state = emb.sgd_step(params, grads, cfg.lr_stage1, cfg.momentum, cfg.weight_decay, state)
            losses.append(id_loss)
        rec = EpochRecord(epoch, 1, 0.0, float(np.mean(losses)), float(np.mean(losses)),
                          (time.perf_counter() - t_start) * 1e3)
        log.debug("stage1 epoch %d identity loss %.5f", epoch, rec.mean_identity_loss)
        if records is not None:
            records.append(rec)
    return params


def estimate_epoch_model(params, features, labels, cfg: TrainConfig, seed=None):
    """Forward the training set, sample labeled pairs and fit the hypothesis model."""
    x, y = _labeled(features, labels)
    embeddings = emb.embed(params, x)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    pos, neg = sample_pairs(y, cfg.pair_budget, cfg.pair_budget, rng)
    return fit_hypothesis(pair_diffs(embeddings, pos), pair_diffs(embeddings, neg), cfg, rng)


def fit_hypothesis(pos_diffs, neg_diffs, cfg, rng=None):
    """MG covariances or symmetrized EM mixtures, per ``cfg.variant``."""
    if cfg.variant == "mg":
        return fit_mg_model(pos_diffs, neg_diffs, cfg.clip_mode, cfg.clip_eps, cfg.ridge_rel)
    seed = 0 if rng is None else int(rng.integers(2**31))
    h1, _ = em_fit(symmetrize(pos_diffs), cfg.k1, seed=seed, max_iters=cfg.em_max_iters,
                   tol=cfg.em_tol, diagonal=cfg.diagonal, symmetric=True, hypothesis="H1")
    h0, _ = em_fit(symmetrize(neg_diffs), cfg.k0, seed=seed + 1, max_iters=cfg.em_max_iters,
                   tol=cfg.em_tol, diagonal=cfg.diagonal, symmetric=True, hypothesis="H0")
    return GmmModel(h1, h0)


def summarize_model(model):
    if model.variant == "mg":
        return {"trace_sigma1": float(np.trace(model.sigma1)),
                "trace_sigma0": float(np.trace(model.sigma0)),
                "form_max_eig": float(np.linalg.eigvalsh(model.form)[-1])}
    return {"h1_weights": model.h1.weights.tolist(), "h0_weights": model.h0.weights.tolist()}


def train_stage2(params, features, labels, cfg: TrainConfig, records=None, on_batch=None):
    """Alternating model re-estimation and full-loss descent.

    ``on_batch(epoch, model)`` is called before every batch update with the
    frozen model of that epoch.
    """
    cfg.validate()
    x, y = _labeled(features, labels)
    _, yi = _class_index(y)
    rng = np.random.default_rng([cfg.seed, 2])
    state = None
    epochs = []
    for e in range(cfg.t1_minus_t0):
        t_start = time.perf_counter()
        epoch = cfg.t0 + e
        model = estimate_epoch_model(params, x, y, cfg, seed=[cfg.seed, 3, epoch])
        pls, ils, tls = [], [], []
        for idx in _batches(len(x), cfg.batch_size, rng):
            if on_batch is not None:
                on_batch(epoch, model)
            trace = emb.forward(params, x[idx])
            pos, neg = build_batch_pairs(yi[idx])
            pl, il, g_emb, g_lp = batch_loss_and_grads(
                model, trace.embedding, trace.log_probs, yi[idx], pos, neg, cfg.loss)
            grads = emb.backward(params, trace, g_emb, g_lp)
            params, state = emb.sgd_step(params, grads, cfg.lr_stage2, cfg.momentum, cfg.weight_decay, state)
            pls.append(pl)
            ils.append(il)
            tls.append(total_loss(pl, il, cfg.loss.alpha))
        rec = EpochRecord(epoch, 2, float(np.mean(pls)), float(np.mean(ils)), float(np.mean(tls)),
                          (time.perf_counter() - t_start) * 1e3, summarize_model(model))
        log.debug("stage2 epoch %d total loss %.5f", epoch, rec.mean_total_loss)
        epochs.append(rec)
        if records is not None:
            records.append(rec)
    final = estimate_epoch_model(params, x, y, cfg, seed=[cfg.seed, 3, cfg.t0 + cfg.t1_minus_t0])
    return TrainReport(epochs, params, final)


def train(features, labels, cfg: TrainConfig):
    """Run both stages; the report holds one record per epoch of either stage."""
    records = []
    params = train_stage1(features, labels, cfg, records=records)
    report = train_stage2(params, features, labels, cfg)
    return TrainReport(records + report.epochs, report.params, report.model)
