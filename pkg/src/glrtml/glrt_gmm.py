"""Gaussian-mixture hypothesis models, EM fitting and the mixture GLRT score."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .clustering import kmeans_pp_init
from .errors import DimensionMismatch, EmptyComponent, EmptyInput, NotPositiveDefinite
from .numerics import cholesky, log_sum_exp, sym_eigen

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
EMPTY_MASS = 1e-12


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray   # (K,)
    means: np.ndarray     # (K, d)
    covs: np.ndarray      # (K, d, d)
    hypothesis: str = ""

    @property
    def k(self):
        return len(self.weights)

    @property
    def d(self):
        return self.means.shape[1]

    def to_dict(self):
        return {"hypothesis": self.hypothesis, "weights": self.weights.tolist(),
                "means": self.means.tolist(), "covs": self.covs.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["weights"], float), np.asarray(data["means"], float),
                   np.asarray(data["covs"], float), data.get("hypothesis", ""))


@dataclass(frozen=True)
class GmmModel:
    """Paired mixtures for H1 (same object) and H0 (different objects)."""
    h1: GmmParams
    h0: GmmParams

    variant = "gmm"

    @property
    def d(self):
        return self.h1.d

    def score(self, diffs):
        return gmm_score(self.h1, self.h0, diffs)

    def score_grad(self, diffs):
        x = np.atleast_2d(diffs)
        return gmm_logpdf_grad(self.h1, x) - gmm_logpdf_grad(self.h0, x)

    def parameter_count(self):
        k, d = self.h1.k + self.h0.k, self.d
        return {"mixture_entries": k * d * (d + 2) // 2 + k}

    def to_dict(self):
        return {"variant": "gmm", "h1": self.h1.to_dict(), "h0": self.h0.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(GmmParams.from_dict(data["h1"]), GmmParams.from_dict(data["h0"]))


def _as_rows(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise DimensionMismatch(f"vector width {x.shape[-1]} != model dimension {d}")
    return np.atleast_2d(x)


def _gauss_logpdf_rows(mean, L, x):
    z = solve_triangular(L, (x - mean).T, lower=True, check_finite=False)
    half_logdet = np.log(np.diag(L)).sum()
    return -0.5 * np.einsum("dn,dn->n", z, z) - half_logdet - 0.5 * len(mean) * LOG_2PI


def gauss_logpdf(mean, cov, x):
    """Log density of ``N(mean, cov)`` at ``x`` (a vector or a batch of rows)."""
    mean = np.asarray(mean, dtype=float)
    out = _gauss_logpdf_rows(mean, cholesky(cov), _as_rows(x, len(mean)))
    return float(out[0]) if np.ndim(x) == 1 else out


def component_logpdfs(params: GmmParams, x):
    """``(n, K)`` matrix of ``log pi_k + log N(x | mu_k, S_k)``."""
    x = _as_rows(x, params.d)
    cols = [np.log(w) + _gauss_logpdf_rows(m, cholesky(c), x)
            for w, m, c in zip(params.weights, params.means, params.covs)]
    return np.stack(cols, axis=1)


def gmm_logpdf(params: GmmParams, x):
    out = log_sum_exp(component_logpdfs(params, x), axis=1)
    return float(out[0]) if np.ndim(x) == 1 else out


def responsibilities(params: GmmParams, x):
    lp = component_logpdfs(params, x)
    return np.exp(lp - log_sum_exp(lp, axis=1)[:, None])


def gmm_logpdf_grad(params: GmmParams, x):
    """Gradient of the mixture log density w.r.t. each row of ``x``."""
    x = _as_rows(x, params.d)
    resp = responsibilities(params, x)
    g = np.zeros_like(x)
    for k in range(params.k):
        L = cholesky(params.covs[k])
        r = x - params.means[k]
        sol = solve_triangular(L.T, solve_triangular(L, r.T, lower=True), lower=False)
        g -= resp[:, k:k + 1] * sol.T
    return g


def gmm_score(model1: GmmParams, model0: GmmParams, diffs):
    """Log-likelihood ratio of the two mixtures."""
    if model1.d != model0.d:
        raise DimensionMismatch("hypothesis models have different dimensions")
    return gmm_logpdf(model1, diffs) - gmm_logpdf(model0, diffs)


def symmetrize(diffs):
    """The multiset ``diffs`` together with every negated diff."""
    x = np.asarray(diffs, dtype=float)
    if x.size == 0:
        return x.reshape(0, x.shape[-1] if x.ndim == 2 else 0)
    x = np.atleast_2d(x)
    return np.concatenate([x, -x])


def weighted_mahalanobis_approx(sigma1, model0: GmmParams, diffs):
    """Expected-log-likelihood approximation of the mixture score.

    ``-1/2 D^2(x, 0, S1) + sum_k gamma_k / 2 * D^2(x, mu_k, S0_k)`` with the
    responsibilities taken from ``model0``; constants are dropped.
    """
    x = _as_rows(diffs, model0.d)
    L1 = cholesky(sigma1)
    z1 = solve_triangular(L1, x.T, lower=True)
    out = -0.5 * np.einsum("dn,dn->n", z1, z1)
    resp = responsibilities(model0, x)
    for k in range(model0.k):
        z = solve_triangular(cholesky(model0.covs[k]), (x - model0.means[k]).T, lower=True)
        out += 0.5 * resp[:, k] * np.einsum("dn,dn->n", z, z)
    return float(out[0]) if np.ndim(diffs) == 1 else out


def _floor_cov(cov, floor, diagonal):
    if diagonal:
        return np.diag(np.maximum(np.diag(cov), floor))
    cov = 0.5 * (cov + cov.T)
    try:
        cholesky(cov - floor * np.eye(len(cov)))
        return cov
    except NotPositiveDefinite:
        pass
    eig = sym_eigen(cov)
    v = eig.eigenvectors
    out = (v * np.maximum(eig.eigenvalues, floor)) @ v.T
    return 0.5 * (out + out.T)


def _symmetric_partners(k):
    """Component pairing for an even mixture: ``(a, b)`` pairs plus a lone zero-mean index."""
    pairs = [(2 * i, 2 * i + 1) for i in range(k // 2)]
    lone = k - 1 if k % 2 else None
    return pairs, lone


def _symmetrize_params(weights, means, covs, k):
    pairs, lone = _symmetric_partners(k)
    for a, b in pairs:
        mu = 0.5 * (means[a] - means[b])
        means[a], means[b] = mu, -mu
        covs[a] = covs[b] = 0.5 * (covs[a] + covs[b])
        weights[a] = weights[b] = 0.5 * (weights[a] + weights[b])
    if lone is not None:
        means[lone] = 0.0
    return weights, means, covs


def em_fit(samples, k, seed=0, max_iters=200, tol=1e-6, cov_floor=None, diagonal=False,
           symmetric=False, hypothesis=""):
    """Fit a ``k``-component Gaussian mixture by expectation-maximization.

    Returns ``(params, history)`` where ``history[t]`` is the observed-data
    log-likelihood after ``t`` M-steps.  Stops when the relative improvement
    drops below ``tol`` or after ``max_iters`` M-steps.

    With ``symmetric=True`` the mixture is constrained to be even
    (``p(x) == p(-x)``): components come in mirrored pairs plus one
    zero-mean component when ``k`` is odd.  Use it on symmetrized diffs.
    Every covariance has its eigenvalues floored at ``cov_floor`` (default
    ``1e-6 * trace(pooled) / d``); with ``diagonal=True`` covariances are
    diagonal.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = x.shape
    if n == 0:
        raise EmptyInput("no samples")
    if k < 1 or n < k:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    pooled_mean = x.mean(axis=0)
    pooled = (x - pooled_mean).T @ (x - pooled_mean) / n
    if cov_floor is None:
        cov_floor = max(1e-6 * np.trace(pooled) / d, 1e-12)
    pooled = _floor_cov(pooled, cov_floor, diagonal)

    if k == 1:
        means = pooled_mean[None].copy()
    elif symmetric:
        seeds = kmeans_pp_init(x, (k + 1) // 2, rng)
        means = np.zeros((k, d))
        pairs, _ = _symmetric_partners(k)
        for i, (a, b) in enumerate(pairs):
            means[a], means[b] = seeds[i], -seeds[i]
    else:
        means = kmeans_pp_init(x, k, rng)
    weights = np.full(k, 1.0 / k)
    covs = np.repeat(pooled[None], k, axis=0)
    if symmetric:
        weights, means, covs = _symmetrize_params(weights, means, covs, k)

    def estep(w, m, c):
        lp = component_logpdfs(GmmParams(w, m, c), x)
        lse = log_sum_exp(lp, axis=1)
        return float(lse.sum()), np.exp(lp - lse[:, None]), lse

    ll, resp, row_ll = estep(weights, means, covs)
    history = [ll]
    for _ in range(max_iters):
        mass = resp.sum(axis=0)
        weights = np.empty(k)
        means = np.empty((k, d))
        covs = np.empty((k, d, d))
        for j in range(k):
            if mass[j] < EMPTY_MASS:
                worst = int(np.argmin(row_ll))
                log.info("re-seeding empty mixture component %d at sample %d", j, worst)
                weights[j], means[j], covs[j] = 1.0 / k, x[worst], pooled
                continue
            r = resp[:, j]
            mu = r @ x / mass[j]
            diff = x - mu
            cov = (diff * r[:, None]).T @ diff / mass[j]
            weights[j], means[j], covs[j] = mass[j] / n, mu, _floor_cov(cov, cov_floor, diagonal)
        if symmetric:
            weights, means, covs = _symmetrize_params(weights, means, covs, k)
        weights = weights / weights.sum()
        if not np.all(np.isfinite(means)):
            raise EmptyComponent("mixture parameters became non-finite")
        new_ll, resp, row_ll = estep(weights, means, covs)
        history.append(new_ll)
        converged = abs(new_ll - ll) <= tol * max(abs(ll), 1e-300)
        ll = new_ll
        if converged:
            break
    return GmmParams(weights, means, covs, hypothesis), history
