"""Query-vs-gallery scoring and ranking metrics.

Rankings sort scores in descending order; ties keep gallery index order.
Queries without any relevant gallery item are left out of every average
and reported as ``unanswerable``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import DISTRACTOR
from .errors import DimensionMismatch, EmptyInput


@dataclass
class RetrievalRun:
    scores: np.ndarray      # (n_query, n_gallery)
    relevance: np.ndarray   # bool, same shape
    k_list: tuple = (50,)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.relevance = np.asarray(self.relevance, dtype=bool)
        if self.scores.shape != self.relevance.shape or self.scores.ndim != 2:
            raise DimensionMismatch("scores and relevance must be matching 2-D arrays")


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    p_fa: np.ndarray
    p_d: np.ndarray

    def pd_at(self, p_fa):
        """Detection rate at a false-alarm rate, linearly interpolated."""
        return float(np.interp(p_fa, self.p_fa, self.p_d))


@dataclass
class Metrics:
    map: float
    recall_at_k: dict
    precision_at_k: dict
    per_query_ap: list = field(default_factory=list)
    unanswerable: int = 0

    def to_dict(self):
        return {"map": self.map,
                "recall_at_k": {str(k): v for k, v in self.recall_at_k.items()},
                "precision_at_k": {str(k): v for k, v in self.precision_at_k.items()},
                "per_query_ap": self.per_query_ap, "unanswerable": self.unanswerable}


def relevance_matrix(query_labels, gallery_labels):
    q = np.asarray(query_labels)[:, None]
    g = np.asarray(gallery_labels)[None, :]
    return (q == g) & (g != DISTRACTOR)


def score_matrix(model, query, gallery, chunk_rows=None):
    """Entry ``(i, j)`` is ``model.score(query[i] - gallery[j])``."""
    q = np.atleast_2d(np.asarray(query, dtype=float))
    g = np.atleast_2d(np.asarray(gallery, dtype=float))
    if q.shape[1] != g.shape[1] or q.shape[1] != model.d:
        raise DimensionMismatch("query, gallery and model dimensions must agree")
    if chunk_rows is None:
        chunk_rows = max(1, 2_000_000 // max(len(g) * q.shape[1], 1))
    out = np.empty((len(q), len(g)))
    for i in range(0, len(q), chunk_rows):
        block = q[i:i + chunk_rows, None, :] - g[None, :, :]
        out[i:i + chunk_rows] = model.score(block.reshape(-1, q.shape[1])).reshape(len(block), len(g))
    return out


def cosine_score_matrix(query, gallery):
    """Cosine similarity; a zero vector scores 0 against everything."""
    q = np.atleast_2d(np.asarray(query, dtype=float))
    g = np.atleast_2d(np.asarray(gallery, dtype=float))
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    gn = np.linalg.norm(g, axis=1, keepdims=True)
    q = np.divide(q, qn, out=np.zeros_like(q), where=qn > 0)
    g = np.divide(g, gn, out=np.zeros_like(g), where=gn > 0)
    return q @ g.T


def ranking(scores):
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def average_precision(scores, relevance):
    """Mean precision at the ranks of the relevant items; NaN when none is relevant."""
    rel = np.asarray(relevance, dtype=bool)[ranking(scores)]
    n_rel = rel.sum()
    if n_rel == 0:
        return float("nan")
    hits = np.cumsum(rel)
    ranks = np.flatnonzero(rel) + 1
    return float((hits[rel] / ranks).sum() / n_rel)


def metrics(run: RetrievalRun) -> Metrics:
    aps, recalls, precisions = [], {k: [] for k in run.k_list}, {k: [] for k in run.k_list}
    unanswerable = 0
    for s, r in zip(run.scores, run.relevance):
        n_rel = r.sum()
        if n_rel == 0:
            unanswerable += 1
            aps.append(None)
            continue
        ordered = r[ranking(s)]
        aps.append(average_precision(s, r))
        for k in run.k_list:
            top = ordered[:k].sum()
            recalls[k].append(top / n_rel)
            precisions[k].append(top / k)
    answered = [a for a in aps if a is not None]
    if not answered:
        nan = float("nan")
        return Metrics(nan, {k: nan for k in run.k_list}, {k: nan for k in run.k_list}, aps, unanswerable)
    return Metrics(float(np.mean(answered)),
                   {k: float(np.mean(v)) for k, v in recalls.items()},
                   {k: float(np.mean(v)) for k, v in precisions.items()},
                   aps, unanswerable)


def evaluate(scores, query_labels, gallery_labels, k_list=(50,)):
    return metrics(RetrievalRun(scores, relevance_matrix(query_labels, gallery_labels), tuple(k_list)))


def roc_curve(pos_scores, neg_scores, grid_size=2001):
    """Empirical ROC of the threshold test ``score >= beta``.

    Thresholds are pooled-score quantiles (so resolution follows the data)
    preceded by one threshold above every score, in descending order.
    """
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise EmptyInput("both score sets must be non-empty")
    pooled = np.concatenate([pos, neg])
    grid = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, grid_size)))[::-1]
    top = pooled.max()
    thresholds = np.concatenate([[np.nextafter(top, np.inf)], grid])
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    p_d = 1.0 - np.searchsorted(pos_sorted, thresholds, side="left") / len(pos)
    p_fa = 1.0 - np.searchsorted(neg_sorted, thresholds, side="left") / len(neg)
    return RocCurve(thresholds, p_fa, p_d)
