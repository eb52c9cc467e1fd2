"""Deterministic synthetic sequence data with three noise conditions.

Each class emits frames from an isotropic Gaussian around a fixed mean;
a sequence is a run of label segments.  The "clean" condition adds
nothing, "seen" adds Gaussian noise, and "unseen" adds noise from a
different family (uniform, larger variance) plus a constant per-sequence
offset, the desk-scale stand-in for noise types absent from training.
Everything derives from (seed, sequence index), so datasets are
reproducible sequence by sequence.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

CONDITIONS = ("clean", "seen", "unseen")


class ConfigInvalid(Exception):
    pass


@dataclass
class UnseenNoise:
    family: str = "uniform"
    variance_multiplier: float = 2.5    # vs. the seen-noise variance
    offset_scale: float = 0.25          # half-width of the per-sequence shift

    def __post_init__(self):
        if self.family != "uniform":
            raise ConfigInvalid("unsupported unseen noise family %r" % (self.family,))
        if self.variance_multiplier < 0 or self.offset_scale < 0:
            raise ConfigInvalid("unseen noise parameters must be nonnegative")


@dataclass
class GeneratorConfig:
    num_classes: int = 5
    feature_dim: int = 8
    class_mean_scale: float = 2.0
    emission_stddev: float = 0.25
    segment_length: tuple = (3, 8)      # frames per label, inclusive
    labels_per_sequence: tuple = (2, 5)
    noise_condition: str = "clean"
    seen_noise_stddev: float = 0.5
    unseen: UnseenNoise = field(default_factory=UnseenNoise)
    allow_repeats: bool = False
    seed: int = 0
    mean_seed: int = None       # class-mean geometry; None ties it to seed

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigInvalid("num_classes: need at least one class")
        if self.num_classes > self.feature_dim:
            raise ConfigInvalid("num_classes: class means need "
                                "num_classes <= feature_dim")
        for name in ("emission_stddev", "seen_noise_stddev"):
            if getattr(self, name) < 0:
                raise ConfigInvalid("%s: must be nonnegative" % name)
        for name in ("segment_length", "labels_per_sequence"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ConfigInvalid("%s: must satisfy 1 <= min <= max" % name)
        if self.allow_repeats and self.segment_length[0] < 2:
            raise ConfigInvalid("allow_repeats: needs segment length >= 2 so "
                                "the alignment can cross a blank")
        if (not self.allow_repeats and self.num_classes == 1
                and self.labels_per_sequence[1] > 1):
            raise ConfigInvalid("labels_per_sequence: one class cannot avoid "
                                "consecutive repeats")
        if self.noise_condition not in CONDITIONS:
            raise ConfigInvalid("noise_condition: unknown condition %r"
                                % (self.noise_condition,))
        # one-hot directions scaled by class_mean_scale sit sqrt(2)*scale
        # apart; demand the configured emission spread leaves that usable
        if np.sqrt(2.0) * self.class_mean_scale < \
                4.0 * self.emission_stddev * self.class_mean_scale:
            raise ConfigInvalid("emission_stddev: too large for separable "
                                "class means (needs < sqrt(2)/4)")


@dataclass
class SequenceSample:
    x: np.ndarray               # (T, F) frame features
    framewise: np.ndarray       # (T,) class per frame, 1-based
    collapsed: np.ndarray       # per-segment labels
    condition: str


def class_means(cfg):
    """Deterministic class means: a seeded random rotation of scaled
    one-hot directions.  Pairwise distance is sqrt(2)*class_mean_scale.
    mean_seed decouples the geometry from the sampling seed, so replicate
    datasets can share one task."""
    base = cfg.seed if cfg.mean_seed is None else cfg.mean_seed
    rng = np.random.default_rng([base, 7919])
    q, _ = np.linalg.qr(rng.normal(size=(cfg.feature_dim, cfg.feature_dim)))
    return cfg.class_mean_scale * q[:, : cfg.num_classes].T


def _noise(cfg, condition, rng, T):
    """The additive noise block for one sequence under a condition."""
    F = cfg.feature_dim
    if condition == "clean":
        return np.zeros((T, F))
    if condition == "seen":
        return rng.normal(0.0, cfg.seen_noise_stddev, (T, F))
    var = cfg.unseen.variance_multiplier * cfg.seen_noise_stddev ** 2
    half = np.sqrt(3.0 * var)
    offset = rng.uniform(-cfg.unseen.offset_scale, cfg.unseen.offset_scale, F)
    return rng.uniform(-half, half, (T, F)) + offset


def _one_sequence(cfg, means, index):
    rng = np.random.default_rng([cfg.seed, int(index), CONDITIONS.index(cfg.noise_condition)])
    lo, hi = cfg.labels_per_sequence
    r = int(rng.integers(lo, hi + 1))
    labels = np.empty(r, dtype=np.intp)
    for i in range(r):
        c = int(rng.integers(1, cfg.num_classes + 1))
        if not cfg.allow_repeats:
            while r > 1 and i > 0 and c == labels[i - 1]:
                c = int(rng.integers(1, cfg.num_classes + 1))
        labels[i] = c
    slo, shi = cfg.segment_length
    seg_lens = rng.integers(slo, shi + 1, r)
    framewise = np.repeat(labels, seg_lens)
    T = len(framewise)
    x = means[framewise - 1] + rng.normal(0.0, cfg.emission_stddev, (T, cfg.feature_dim))
    x = x + _noise(cfg, cfg.noise_condition, rng, T)
    return SequenceSample(x=x, framewise=framewise, collapsed=labels,
                          condition=cfg.noise_condition)


def generate(cfg, n, start_index=0):
    """Produce n sequences; deterministic in (cfg, n, start_index) and
    parallel-safe because every sequence reseeds from (seed, index,
    condition).  Disjoint start_index ranges give independent draws from
    the same task (same class means), which is how train and test files
    stay leak-free under one seed."""
    if n < 1:
        raise ConfigInvalid("n: must be at least 1")
    means = class_means(cfg)
    return [_one_sequence(cfg, means, start_index + i) for i in range(n)]


def split(dataset, fractions, seed=0):
    """Disjoint (train, validation, test) split, stratified by condition."""
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise ConfigInvalid("fractions: must be nonnegative and sum to 1")
    by_condition = {}
    for i, sample in enumerate(dataset):
        by_condition.setdefault(sample.condition, []).append(i)
    rng = np.random.default_rng([seed, 104729])
    parts = ([], [], [])
    for condition in sorted(by_condition):
        idx = np.array(by_condition[condition])
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        n_val = min(n_val, n - n_train)
        cut1, cut2 = n_train, n_train + n_val
        for part, sel in zip(parts, (idx[:cut1], idx[cut1:cut2], idx[cut2:])):
            part.extend(int(i) for i in sel)
    return tuple([dataset[i] for i in sorted(part)] for part in parts)


def save_jsonl(samples, path):
    """One JSON object per sample; float lists round-trip bit-exactly."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps({
                "features": s.x.tolist(),
                "framewise": [int(k) for k in s.framewise],
                "collapsed": [int(c) for c in s.collapsed],
                "condition": s.condition,
            }) + "\n")


def load_jsonl(path):
    out = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            out.append(SequenceSample(
                x=np.array(rec["features"], dtype=float),
                framewise=np.array(rec["framewise"], dtype=np.intp),
                collapsed=np.array(rec["collapsed"], dtype=np.intp),
                condition=rec["condition"],
            ))
    return out
