"""Multivariate-Gaussian GLRT similarity on differential embeddings.

Both hypotheses (paired / unpaired) model the difference ``x_i - x_j`` as a
zero-mean Gaussian.  The similarity is the quadratic part of the
log-likelihood ratio, ``x^T (S0^-1 - S1^-1) x``, with the form matrix
optionally spectrum-clipped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .numerics import ClipMode, cholesky_inverse, clip_spectrum, quadratic_form

# The unclipped form is negative definite whenever paired differences are
# tighter than unpaired ones, and larger scores must mean "more similar",
# so the default clamp keeps the form negative definite.
DEFAULT_CLIP_MODE = ClipMode.FORCE_NEGATIVE_DEFINITE
DEFAULT_CLIP_EPS = 1e-6
DEFAULT_RIDGE_REL = 1e-4
RIDGE_FLOOR = 1e-10


@dataclass(frozen=True)
class MgModel:
    sigma1: np.ndarray
    sigma0: np.ndarray
    form: np.ndarray
    clip_mode: ClipMode = DEFAULT_CLIP_MODE
    clip_eps: float = DEFAULT_CLIP_EPS
    ridge: float = 0.0   # relative ridge used at fit time; 0 when built from given covariances

    variant = "mg"

    @property
    def d(self):
        return self.form.shape[0]

    def score(self, diffs):
        return mg_score(self, diffs)

    def score_grad(self, diffs):
        """d score / d diff for each row of ``diffs``."""
        return 2.0 * np.atleast_2d(diffs) @ self.form

    def parameter_count(self):
        """Free entries of the two symmetric covariances and of the form matrix."""
        d = self.d
        return {"covariance_entries": d * (d + 1), "form_entries": d * d}

    def to_dict(self):
        return {"variant": "mg", "sigma1": self.sigma1.tolist(), "sigma0": self.sigma0.tolist(),
                "form": self.form.tolist(), "clip_mode": self.clip_mode.value,
                "clip_eps": self.clip_eps, "ridge": self.ridge}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["sigma1"], float), np.asarray(data["sigma0"], float),
                   np.asarray(data["form"], float), ClipMode(data["clip_mode"]),
                   float(data["clip_eps"]), float(data["ridge"]))


def estimate_cov(diffs, ridge=0.0):
    """Zero-mean MLE ``(1/N) sum x x^T`` plus ``ridge * I``."""
    x = np.atleast_2d(np.asarray(diffs, dtype=float))
    if x.shape[0] == 0 or x.size == 0:
        raise EmptyInput("no differential embeddings to estimate from")
    cov = x.T @ x / x.shape[0]
    cov = 0.5 * (cov + cov.T)
    return cov + ridge * np.eye(x.shape[1])


def trace_ridge(cov, ridge_rel=DEFAULT_RIDGE_REL, floor=RIDGE_FLOOR):
    """Scale-free ridge ``ridge_rel * trace(cov) / d``, never below ``floor``."""
    return max(ridge_rel * np.trace(cov) / cov.shape[0], floor)


def build_mg_model(sigma1, sigma0, clip_mode=DEFAULT_CLIP_MODE, clip_eps=DEFAULT_CLIP_EPS, ridge=0.0):
    inv1, _ = cholesky_inverse(sigma1)
    inv0, _ = cholesky_inverse(sigma0)
    form = clip_spectrum(inv0 - inv1, clip_mode, clip_eps)
    return MgModel(np.asarray(sigma1, float), np.asarray(sigma0, float), form,
                   ClipMode(clip_mode), float(clip_eps), float(ridge))


def fit_mg_model(pos_diffs, neg_diffs, clip_mode=DEFAULT_CLIP_MODE, clip_eps=DEFAULT_CLIP_EPS,
                 ridge_rel=DEFAULT_RIDGE_REL):
    """Estimate both covariances with a trace-scaled ridge and build the model."""
    raw1 = estimate_cov(pos_diffs)
    raw0 = estimate_cov(neg_diffs)
    r1, r0 = trace_ridge(raw1, ridge_rel), trace_ridge(raw0, ridge_rel)
    eye = np.eye(raw1.shape[0])
    return build_mg_model(raw1 + r1 * eye, raw0 + r0 * eye, clip_mode, clip_eps, ridge=ridge_rel)


def mg_score(model: MgModel, diffs):
    """Estimated similarity ``x^T form x``; even in ``x`` so pair order is irrelevant."""
    x = np.asarray(diffs, dtype=float)
    if x.shape[-1] != model.d:
        raise DimensionMismatch(f"diff width {x.shape[-1]} != model dimension {model.d}")
    if x.ndim == 1:
        return float(quadratic_form(model.form, x[None, :])[0])
    return quadratic_form(model.form, x)


def mg_full_llr(sigma1, sigma0, diffs):
    """Exact zero-mean log-likelihood ratio ``log N(x|0,S1) - log N(x|0,S0)``."""
    inv1, ld1 = cholesky_inverse(sigma1)
    inv0, ld0 = cholesky_inverse(sigma0)
    x = np.asarray(diffs, dtype=float)
    q = 0.5 * quadratic_form(inv0, x) - 0.5 * quadratic_form(inv1, x)
    return q + 0.5 * (ld0 - ld1)
