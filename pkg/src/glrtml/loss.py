"""GLRTML training objective and its analytic gradients.

The pair term is ``log(1 + sum_l exp(nu s_n^l) * sum_m exp(-nu s_p^m))``,
evaluated through the two log-sum-exp aggregates so large ``nu * s`` never
overflows.  The identity term is the mean negative log-probability of the
true class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from .errors import DimensionMismatch, InvalidLabel
from .numerics import log_sum_exp

log = logging.getLogger(__name__)

DEFAULT_NU = 0.001
DEFAULT_ALPHA = 1.0


@dataclass(frozen=True)
class LossConfig:
    nu: float = DEFAULT_NU
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


def _aggregate(scores_p, scores_n, nu):
    sp = np.asarray(scores_p, dtype=float).ravel()
    sn = np.asarray(scores_n, dtype=float).ravel()
    return sp, sn, log_sum_exp(nu * sn) + log_sum_exp(-nu * sp)


def glrtml_pair_loss(scores_p, scores_n, nu=DEFAULT_NU):
    """Pair term of the loss; 0 when either pair set is empty."""
    if len(scores_p) == 0 or len(scores_n) == 0:
        return 0.0
    _, _, a = _aggregate(scores_p, scores_n, nu)
    return float(np.logaddexp(0.0, a))


def pair_loss_grad_scores(scores_p, scores_n, nu=DEFAULT_NU):
    """Partials of the pair term w.r.t. every positive and negative score.

    ``dL/ds_p^m = -nu * sigmoid(A) * softmax(-nu s_p)_m`` and
    ``dL/ds_n^l = +nu * sigmoid(A) * softmax(nu s_n)_l`` where ``A`` is the
    log of the double sum, which is the closed form rearranged to stay finite.
    """
    if len(scores_p) == 0 or len(scores_n) == 0:
        return np.zeros(len(scores_p)), np.zeros(len(scores_n))
    sp, sn, a = _aggregate(scores_p, scores_n, nu)
    scale = nu * expit(a)
    return -scale * softmax(-nu * sp), scale * softmax(nu * sn)


def identity_loss(log_probs, labels):
    lp = np.atleast_2d(np.asarray(log_probs, dtype=float))
    y = np.asarray(labels)
    if len(y) != len(lp):
        raise DimensionMismatch("one label per row of log-probabilities required")
    if np.any(y < 0) or np.any(y >= lp.shape[1]):
        raise InvalidLabel("labels must be class ids in [0, C)")
    return float(-lp[np.arange(len(y)), y].mean())


def identity_loss_grad(log_probs, labels, alpha=1.0):
    """Gradient of ``alpha * identity_loss`` w.r.t. the log-probabilities."""
    lp = np.atleast_2d(log_probs)
    g = np.zeros_like(lp)
    g[np.arange(len(labels)), labels] = -alpha / len(labels)
    return g


def total_loss(pair_loss, id_loss, alpha=DEFAULT_ALPHA):
    return pair_loss + alpha * id_loss


def score_grad_embeddings(model, diff):
    """``(d s / d x_i, d s / d x_j)`` for the pair whose diff is ``x_i - x_j``."""
    diff = np.asarray(diff, dtype=float)
    if diff.shape[-1] != model.d:
        raise DimensionMismatch(f"diff width {diff.shape[-1]} != model dimension {model.d}")
    g = model.score_grad(diff)
    if diff.ndim == 1:
        g = g[0]
    return g, -g


def batch_loss_and_grads(model, embeddings, log_probs, labels, pos_pairs, neg_pairs, cfg: LossConfig):
    """Full loss on one batch and its gradients w.r.t. embeddings and log-probs.

    The hypothesis ``model`` is held fixed.  Returns
    ``(pair_loss, id_loss, d_embeddings, d_log_probs)``.
    """
    emb = np.asarray(embeddings, dtype=float)
    g_emb = np.zeros_like(emb)
    pos = np.asarray(pos_pairs, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(neg_pairs, dtype=np.int64).reshape(-1, 2)
    pair_loss = 0.0
    if len(pos) and len(neg):
        pairs = np.concatenate([pos, neg])
        diffs = emb[pairs[:, 0]] - emb[pairs[:, 1]]
        scores = model.score(diffs)
        sp, sn = scores[:len(pos)], scores[len(pos):]
        pair_loss = glrtml_pair_loss(sp, sn, cfg.nu)
        gp, gn = pair_loss_grad_scores(sp, sn, cfg.nu)
        g_diff = np.concatenate([gp, gn])[:, None] * model.score_grad(diffs)
        np.add.at(g_emb, pairs[:, 0], g_diff)
        np.add.at(g_emb, pairs[:, 1], -g_diff)
    else:
        log.debug("batch has %d positive and %d negative pairs; pair term skipped", len(pos), len(neg))
    id_loss = identity_loss(log_probs, labels)
    g_lp = identity_loss_grad(log_probs, labels, cfg.alpha)
    return pair_loss, id_loss, g_emb, g_lp
