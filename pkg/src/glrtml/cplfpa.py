"""Fast target-domain adaptation from clustering pseudo-labels.

The embedder stays frozen.  Target embeddings are clustered with k-means,
cluster ids become pseudo-labels, pseudo-positive and pseudo-negative pairs
are sampled within budget, and only the hypothesis distribution parameters
are re-estimated.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import embedder as emb
from .clustering import PseudoLabeling, kmeans
from .errors import InvalidConfig, NoNegativePairs, NoPositivePairs
from .glrt_gmm import GmmModel, em_fit, symmetrize
from .glrt_mg import DEFAULT_CLIP_EPS, DEFAULT_CLIP_MODE, DEFAULT_RIDGE_REL, fit_mg_model
from .pairs import PairIndex, pair_diffs, _draw

__all__ = ["AdaptConfig", "AdaptResult", "PseudoLabeling", "kmeans", "build_pseudo_pairs",
           "adapt_mg", "adapt_gmm", "adapt"]


@dataclass(frozen=True)
class AdaptConfig:
    k: int = 8
    n_init: int = 10
    pos_budget: int = 20_000
    neg_budget: int = 20_000
    seed: int = 0
    variant: str = "mg"
    k1: int = 1
    k0: int = 1
    diagonal: bool = False
    clip_mode: str = DEFAULT_CLIP_MODE.value
    clip_eps: float = DEFAULT_CLIP_EPS
    ridge_rel: float = DEFAULT_RIDGE_REL
    em_max_iters: int = 100
    em_tol: float = 1e-6

    def validate(self):
        if self.k < 2:
            raise InvalidConfig("k must be >= 2")
        if self.n_init < 1:
            raise InvalidConfig("n_init must be >= 1")
        if self.pos_budget < 1 or self.neg_budget < 1:
            raise InvalidConfig("pair budgets must be >= 1")
        if self.variant not in ("mg", "gmm"):
            raise InvalidConfig(f"unknown variant {self.variant!r}")


@dataclass
class AdaptResult:
    model: object
    labeling: PseudoLabeling
    timing: dict
    parameters_updated: dict


def build_pseudo_pairs(embeddings, labeling, cfg: AdaptConfig):
    """Sample pseudo-positive / pseudo-negative diffs, returning ``(pos, neg, pos_idx, neg_idx)``."""
    labels = labeling.assignments if isinstance(labeling, PseudoLabeling) else np.asarray(labeling)
    if len(labels) != len(embeddings):
        raise ValueError("labeling must cover every embedding")
    index = PairIndex(labels)
    if index.n_pos == 0:
        raise NoPositivePairs("every cluster is a singleton")
    if index.n_neg == 0:
        raise NoNegativePairs("all points share one cluster; increase k")
    rng = np.random.default_rng([cfg.seed, 7])
    pos = index.positives(_draw(index.n_pos, cfg.pos_budget, rng))
    neg = index.negatives(_draw(index.n_neg, cfg.neg_budget, rng))
    return pair_diffs(embeddings, pos), pair_diffs(embeddings, neg), pos, neg


def adapt_mg(embeddings, labeling, cfg: AdaptConfig, clip_mode=None, clip_eps=None, ridge_rel=None):
    pos, neg, _, _ = build_pseudo_pairs(embeddings, labeling, cfg)
    return fit_mg_model(pos, neg,
                        cfg.clip_mode if clip_mode is None else clip_mode,
                        cfg.clip_eps if clip_eps is None else clip_eps,
                        cfg.ridge_rel if ridge_rel is None else ridge_rel)


def _fit_mixtures(pos, neg, cfg, cov_floor=None):
    kw = dict(max_iters=cfg.em_max_iters, tol=cfg.em_tol, cov_floor=cov_floor,
              diagonal=cfg.diagonal, symmetric=True)
    h1, _ = em_fit(symmetrize(pos), cfg.k1, seed=cfg.seed, hypothesis="H1", **kw)
    h0, _ = em_fit(symmetrize(neg), cfg.k0, seed=cfg.seed + 1, hypothesis="H0", **kw)
    return GmmModel(h1, h0)


def adapt_gmm(embeddings, labeling, cfg: AdaptConfig, cov_floor=None):
    pos, neg, _, _ = build_pseudo_pairs(embeddings, labeling, cfg)
    return _fit_mixtures(pos, neg, cfg, cov_floor)


def adapt(params, target_features, cfg: AdaptConfig) -> AdaptResult:
    """Cluster target embeddings and re-estimate the hypothesis model.

    ``timing`` carries wall-clock milliseconds per phase: ``forward_ms``,
    ``clustering_ms``, ``diff_ms``, ``update_ms`` and ``total_ms``.
    """
    cfg.validate()
    t0 = time.perf_counter()
    embeddings = emb.embed(params, target_features)
    t1 = time.perf_counter()
    labeling = kmeans(embeddings, cfg.k, seed=cfg.seed, n_init=cfg.n_init)
    t2 = time.perf_counter()
    pos, neg, _, _ = build_pseudo_pairs(embeddings, labeling, cfg)
    t3 = time.perf_counter()
    if cfg.variant == "mg":
        model = fit_mg_model(pos, neg, cfg.clip_mode, cfg.clip_eps, cfg.ridge_rel)
    else:
        model = _fit_mixtures(pos, neg, cfg)
    t4 = time.perf_counter()
    timing = {"forward_ms": (t1 - t0) * 1e3, "clustering_ms": (t2 - t1) * 1e3,
              "diff_ms": (t3 - t2) * 1e3, "update_ms": (t4 - t3) * 1e3, "total_ms": (t4 - t0) * 1e3}
    return AdaptResult(model, labeling, timing, model.parameter_count())
