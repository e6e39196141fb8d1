"""k-means with k-means++ seeding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewPoints


@dataclass(frozen=True)
class PseudoLabeling:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float
    inertia_history: tuple = field(default=())
    iterations: int = 0

    @property
    def k(self):
        return len(self.centers)


def _sq_dists(points, centers, chunk=2048):
    out = np.empty((len(points), len(centers)))
    for i in range(0, len(points), chunk):
        diff = points[i:i + chunk, None, :] - centers[None, :, :]
        out[i:i + chunk] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def kmeans_pp_init(points, k, rng):
    """k-means++ seeding; falls back to uniform picks once all points are covered."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    idx = [int(rng.integers(n))]
    closest = _sq_dists(points, points[idx[-1]][None])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        closest = np.minimum(closest, _sq_dists(points, points[nxt][None])[:, 0])
    return points[idx].copy()


def _lloyd(points, centers, max_iter):
    assign = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        new_assign = np.argmin(_sq_dists(points, centers), axis=1)
        resid = points - centers[new_assign]
        history.append(float(np.einsum("nd,nd->", resid, resid)))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(len(centers)):
            members = points[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    resid = points - centers[assign]
    inertia = float(np.einsum("nd,nd->", resid, resid))
    return PseudoLabeling(assign, centers, inertia, tuple(history), it)


def kmeans(points, k, seed=0, max_iter=300, n_init=1):
    """Lloyd iterations from k-means++ seeds until assignments stop changing.

    Empty clusters keep their previous center, so inertia never increases.
    With ``n_init > 1`` the restarts share one seeded stream and the lowest
    inertia wins (first one on ties).
    """
    points = np.asarray(points, dtype=float)
    if len(points) < k or k < 1:
        raise TooFewPoints(f"need at least k={k} points, got {len(points)}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(points, kmeans_pp_init(points, k, rng), max_iter)
        if best is None or run.inertia < best.inertia:
            best = run
    return best
