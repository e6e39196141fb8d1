"""Seeded desk-scale benchmark comparing scoring pipelines.

Source and target domains share class structure; the target is rotated and
scaled in latent space.  Galleries carry background distractors, which is
where an angle-only metric loses to a likelihood-ratio score.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import embedder as emb
from .cplfpa import AdaptConfig, adapt
from .dataset import SynthConfig, features_and_labels, generate_synthetic
from .retrieval import cosine_score_matrix, evaluate, score_matrix
from .trainer import TrainConfig, train, train_stage1


@dataclass(frozen=True)
class BenchmarkConfig:
    synth: SynthConfig = field(default_factory=lambda: SynthConfig(
        num_classes=8, per_class=60, d_in=16, latent_dim=4, class_sep=3.0, anisotropy=8.0,
        distractors=100, shift_rotation_deg=30.0, shift_scale=1.5))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(t0=30, t1_minus_t0=15, d=16, hidden=32))
    pos_budget: int = 20_000
    neg_budget: int = 20_000
    adapt_k: int | None = None   # None: one cluster per class plus one for background

    def seeded(self, seed):
        return dataclasses.replace(self, synth=dataclasses.replace(self.synth, seed=seed),
                                   train=dataclasses.replace(self.train, seed=seed))


def _arrays(split):
    return [features_and_labels(p) for p in (split.train, split.query, split.gallery)]


def run_benchmark(cfg: BenchmarkConfig, seed=0):
    """mAP of every pipeline on one seed, keyed by pipeline name."""
    cfg = cfg.seeded(seed)
    source, target = generate_synthetic(cfg.synth)
    (xtr, ytr), (xq, yq), (xg, yg) = _arrays(source)
    report = train(xtr, ytr, cfg.train)
    baseline = train_stage1(xtr, ytr, cfg.train)

    def glrt(model, params, q, g):
        return score_matrix(model, emb.embed(params, q), emb.embed(params, g))

    out = {
        "source_glrt": evaluate(glrt(report.model, report.params, xq, xg), yq, yg).map,
        "source_identity_cosine": evaluate(
            cosine_score_matrix(emb.embed(baseline, xq), emb.embed(baseline, xg)), yq, yg).map,
    }
    (ttr, _), (tq, tyq), (tg, tyg) = _arrays(target)
    adapt_cfg = AdaptConfig(k=cfg.adapt_k or cfg.synth.num_classes + 1, pos_budget=cfg.pos_budget,
                            neg_budget=cfg.neg_budget, seed=seed)
    adapted = adapt(report.params, np.concatenate([ttr, tq, tg]), adapt_cfg)
    out["target_unadapted"] = evaluate(glrt(report.model, report.params, tq, tg), tyq, tyg).map
    out["target_adapted"] = evaluate(glrt(adapted.model, report.params, tq, tg), tyq, tyg).map
    return out
