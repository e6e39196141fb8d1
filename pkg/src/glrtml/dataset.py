"""Labeled instances, synthetic source/target domains, splits and CSV I/O.

The synthetic generator stands in for an image dataset: every class is a
Gaussian blob in a low-dimensional latent space sharing one anisotropic
covariance, and instances are lifted to ``d_in`` input features with a
fixed, seeded orthonormal map.  The target domain applies a rotation and a
scale in latent space before the lift.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, IoFailure, ParseFailure

DISTRACTOR = -1


@dataclass(frozen=True)
class LabeledInstance:
    id: str
    label: int
    features: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, LabeledInstance):
            return NotImplemented
        return (self.id == other.id and self.label == other.label
                and np.array_equal(self.features, other.features))

    __hash__ = None


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    query: list = field(default_factory=list)
    gallery: list = field(default_factory=list)

    def parts(self):
        return {"train": self.train, "query": self.query, "gallery": self.gallery}


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 8
    per_class: int = 60
    d_in: int = 16
    latent_dim: int = 4
    class_sep: float = 3.0
    anisotropy: float = 8.0
    distractors: int = 0
    shift_rotation_deg: float = 0.0
    shift_scale: float = 1.0
    train_frac: float = 0.5
    query_frac: float = 0.2
    seed: int = 0

    def validate(self):
        if self.num_classes < 2:
            raise InvalidConfig("num_classes must be >= 2")
        if self.per_class < 2:
            raise InvalidConfig("per_class must be >= 2 so positive pairs exist")
        if self.anisotropy < 1:
            raise InvalidConfig("anisotropy must be >= 1")
        if not 1 <= self.latent_dim <= self.d_in:
            raise InvalidConfig("latent_dim must be in [1, d_in]")
        if self.distractors < 0:
            raise InvalidConfig("distractors must be >= 0")
        if self.shift_scale <= 0:
            raise InvalidConfig("shift_scale must be positive")
        if not (0 <= self.train_frac < 1 and 0 < self.query_frac < 1
                and self.train_frac + self.query_frac < 1):
            raise InvalidConfig("split fractions must lie in [0, 1) and sum below 1")


@dataclass
class SyntheticDomains:
    """Raw generated domains plus the ground-truth generating parameters."""
    source: list
    target: list
    class_means: np.ndarray    # (C, latent_dim), source latent space
    class_cov: np.ndarray      # (latent_dim, latent_dim)
    lift: np.ndarray           # (d_in, latent_dim), orthonormal columns
    shift: np.ndarray          # (latent_dim, latent_dim), rotation times scale


def shift_matrix(latent_dim, rotation_deg, scale):
    """Block-diagonal plane rotation by ``rotation_deg`` in each (2i, 2i+1) plane, times ``scale``."""
    r = np.eye(latent_dim)
    a = math.radians(rotation_deg)
    c, s = math.cos(a), math.sin(a)
    for i in range(0, latent_dim - 1, 2):
        r[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
    return scale * r


def _random_orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.normal(size=(rows, cols)))
    return q * np.sign(np.diag(r))


def synth_domains(cfg: SynthConfig) -> SyntheticDomains:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    k = cfg.latent_dim
    basis = _random_orthonormal(rng, k, k)
    # geometric spectrum from 1 down to 1/anisotropy
    spectrum = np.geomspace(1.0, 1.0 / cfg.anisotropy, k) if k > 1 else np.ones(1)
    class_cov = (basis * spectrum) @ basis.T
    chol = np.linalg.cholesky(class_cov)
    means = rng.normal(scale=cfg.class_sep / math.sqrt(k), size=(cfg.num_classes, k))
    lift = _random_orthonormal(rng, cfg.d_in, k)
    shift = shift_matrix(k, cfg.shift_rotation_deg, cfg.shift_scale)
    background_std = cfg.class_sep

    def domain(prefix, transform):
        out = []
        for c in range(cfg.num_classes):
            z = means[c] + rng.normal(size=(cfg.per_class, k)) @ chol.T
            for i, row in enumerate(z @ transform.T @ lift.T):
                out.append(LabeledInstance(f"{prefix}c{c}_{i}", c, row))
        z = rng.normal(scale=background_std, size=(cfg.distractors, k))
        for i, row in enumerate(z @ transform.T @ lift.T):
            out.append(LabeledInstance(f"{prefix}bg_{i}", DISTRACTOR, row))
        return out

    source = domain("s_", np.eye(k))
    target = domain("t_", shift)
    return SyntheticDomains(source, target, means, class_cov, lift, shift)


def _allocate(n, train_frac, query_frac):
    n_train = min(max(round(train_frac * n), 0), n - 2)
    n_query = min(max(round(query_frac * n), 1), n - n_train - 1)
    return n_train, n_query


def _stratified(instances, train_frac, query_frac, distractors, rng, min_per_class):
    labeled = [x for x in instances if x.label != DISTRACTOR]
    background = [x for x in instances if x.label == DISTRACTOR]
    split = DatasetSplit()
    for label in sorted({x.label for x in labeled}):
        members = [x for x in labeled if x.label == label]
        if len(members) < min_per_class:
            raise InvalidConfig(f"class {label} has {len(members)} instances, need >= {min_per_class}")
        order = rng.permutation(len(members))
        n_train, n_query = _allocate(len(members), train_frac, query_frac)
        members = [members[i] for i in order]
        split.train += members[:n_train]
        split.query += members[n_train:n_train + n_query]
        split.gallery += members[n_train + n_query:]
    split.gallery += background
    if distractors:
        split.gallery += list(distractors)
    return split


def make_split(instances, train_frac, query_frac, distractors=(), seed=0):
    """Label-stratified train/query/gallery split.

    Every class keeps at least one query and one gallery item.  Instances
    labeled ``DISTRACTOR`` and any extra ``distractors`` go to the gallery.
    """
    if not (0 < train_frac < 1 and 0 < query_frac < 1 and train_frac + query_frac < 1):
        raise InvalidConfig("fractions must lie in (0, 1) and sum below 1")
    distractors = [LabeledInstance(x.id, DISTRACTOR, x.features) for x in distractors]
    rng = np.random.default_rng(seed)
    return _stratified(instances, train_frac, query_frac, distractors, rng, min_per_class=3)


def generate_synthetic(cfg: SynthConfig):
    """Return ``(source, target)`` splits generated from ``cfg``."""
    domains = synth_domains(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    source = _stratified(domains.source, cfg.train_frac, cfg.query_frac, (), rng, 2)
    target = _stratified(domains.target, cfg.train_frac, cfg.query_frac, (), rng, 2)
    return source, target


def features_and_labels(instances):
    if not instances:
        return np.zeros((0, 0)), np.zeros(0, dtype=int)
    return (np.stack([x.features for x in instances]),
            np.array([x.label for x in instances], dtype=int))


def save_csv(instances, path):
    """Write ``id,label,f0..`` rows; floats use ``repr`` so they round-trip exactly."""
    dims = {len(x.features) for x in instances}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
    d = dims.pop() if dims else 0
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "label"] + [f"f{i}" for i in range(d)])
            for x in instances:
                w.writerow([x.id, int(x.label)] + [repr(float(v)) for v in x.features])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseFailure("missing header", line=1)
    header = rows[0]
    if header[:2] != ["id", "label"]:
        raise ParseFailure("header must start with id,label", line=1)
    width = len(header)
    out, seen = [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseFailure(f"expected {width} fields, got {len(row)}", line=lineno)
        try:
            label = int(row[1])
            feats = np.array([float(v) for v in row[2:]])
        except ValueError as exc:
            raise ParseFailure(str(exc), line=lineno) from exc
        if row[0] in seen:
            raise ParseFailure(f"duplicate id {row[0]!r}", line=lineno)
        seen.add(row[0])
        out.append(LabeledInstance(row[0], label, feats))
    return out
