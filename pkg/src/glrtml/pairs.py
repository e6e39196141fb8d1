"""Enumeration and uniform sampling of labeled pairs.

Pairs are unordered and canonical (``i < j``).  Sampling draws linear
indices without replacement from the exact positive or negative pair index
space, so no pair is ever drawn twice and every pair is equally likely.
"""
from __future__ import annotations

import numpy as np


def all_pairs(labels):
    """Every ``i < j`` pair split into ``(positives, negatives)`` index arrays."""
    labels = np.asarray(labels)
    i, j = np.triu_indices(len(labels), k=1)
    same = labels[i] == labels[j]
    pos = np.stack([i[same], j[same]], axis=1)
    neg = np.stack([i[~same], j[~same]], axis=1)
    return pos, neg


def _tri_decode(r, n):
    """Map linear indices over the strict upper triangle of an n x n matrix to (i, j)."""
    r = np.asarray(r, dtype=np.int64)
    total = n * (n - 1) // 2
    # count of pairs remaining from row i onward is (n-i)(n-i-1)/2
    rem = total - 1 - r
    k = ((np.sqrt(8.0 * rem + 1.0) - 1.0) // 2).astype(np.int64)
    # guard float rounding
    k = np.where((k + 1) * (k + 2) // 2 <= rem, k + 1, k)
    k = np.where(k * (k + 1) // 2 > rem, k - 1, k)
    i = n - 2 - k
    row_start = total - (n - i) * (n - i - 1) // 2
    j = r - row_start + i + 1
    return i, j


class PairIndex:
    """Index space of positive and negative pairs for a label vector."""

    def __init__(self, labels):
        labels = np.asarray(labels)
        self.n = len(labels)
        classes, inverse = np.unique(labels, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        self.members = np.split(order, np.cumsum(np.bincount(inverse))[:-1])
        sizes = np.array([len(m) for m in self.members], dtype=np.int64)
        self.pos_counts = sizes * (sizes - 1) // 2
        self.pos_offsets = np.concatenate([[0], np.cumsum(self.pos_counts)])
        a, b = np.triu_indices(len(sizes), k=1)
        self.block_a, self.block_b = a, b
        self.neg_counts = sizes[a] * sizes[b]
        self.neg_offsets = np.concatenate([[0], np.cumsum(self.neg_counts)])

    @property
    def n_pos(self):
        return int(self.pos_offsets[-1])

    @property
    def n_neg(self):
        return int(self.neg_offsets[-1])

    def positives(self, r):
        r = np.asarray(r, dtype=np.int64)
        cls = np.searchsorted(self.pos_offsets, r, side="right") - 1
        out = np.empty((len(r), 2), dtype=np.int64)
        for c in np.unique(cls):
            sel = cls == c
            m = self.members[c]
            i, j = _tri_decode(r[sel] - self.pos_offsets[c], len(m))
            out[sel, 0], out[sel, 1] = m[i], m[j]
        return np.sort(out, axis=1)

    def negatives(self, r):
        r = np.asarray(r, dtype=np.int64)
        blk = np.searchsorted(self.neg_offsets, r, side="right") - 1
        out = np.empty((len(r), 2), dtype=np.int64)
        for b in np.unique(blk):
            sel = blk == b
            ma, mb = self.members[self.block_a[b]], self.members[self.block_b[b]]
            local = r[sel] - self.neg_offsets[b]
            out[sel, 0], out[sel, 1] = ma[local // len(mb)], mb[local % len(mb)]
        return np.sort(out, axis=1)


def _draw(total, budget, rng):
    if budget >= total:
        return np.arange(total, dtype=np.int64)
    return np.sort(rng.choice(total, size=budget, replace=False))


def sample_pairs(labels, pos_budget, neg_budget, rng):
    """Uniform pairs without replacement, at most ``pos_budget`` / ``neg_budget`` of each."""
    index = PairIndex(labels)
    pos = index.positives(_draw(index.n_pos, pos_budget, rng))
    neg = index.negatives(_draw(index.n_neg, neg_budget, rng))
    return pos, neg


def pair_diffs(embeddings, pairs):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return embeddings[pairs[:, 0]] - embeddings[pairs[:, 1]]
