"""Loss functions, their error signals, and the class-center bank.

Two training modes share this module.  Framewise mode pairs per-frame
cross-entropy with the classic center loss; sequence mode pairs the CTC
likelihood with the expected center loss (ECL), where the per-frame
labels are replaced by alignment-occupancy weights.

The feature-space error signals (``ecl_grad_features``,
``cl_grad_features``) deliberately omit the factor 2 that differentiating
a squared norm produces; the balancing factor lambda absorbs it.  Tests
pin the relationship: twice the returned signal equals the true gradient.
"""

from dataclasses import dataclass

import numpy as np


class UnknownClass(Exception):
    """A label refers to a class the center bank does not track."""


@dataclass
class FusionConfig:
    lam: float = 1e-3
    mode: str = "temporal"              # "framewise" or "temporal"
    occupancy_mode: str = "paper_literal"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.mode not in ("framewise", "temporal"):
            raise ValueError("unknown mode %r" % (self.mode,))
        if self.occupancy_mode not in ("paper_literal", "frame_normalized"):
            raise ValueError("unknown occupancy mode %r" % (self.occupancy_mode,))


class CenterBank:
    """One feature-space center per non-blank class (classes 1..C).

    Centers start at zero and move only through the explicit update
    rules below, never through loss-gradient descent.
    """

    def __init__(self, num_classes, dim, momentum=1e-3, occupancy_threshold=0.01):
        if occupancy_threshold < 0:
            raise ValueError("occupancy threshold must be nonnegative")
        self.num_classes = num_classes
        self.dim = dim
        self.momentum = momentum
        self.occupancy_threshold = occupancy_threshold
        self.centers = np.zeros((num_classes, dim))

    def center(self, label):
        if not 1 <= label <= self.num_classes:
            raise UnknownClass("no center for class %r" % (label,))
        return self.centers[label - 1]

    def gather(self, labels):
        """Stack the centers for a sequence of non-blank labels."""
        labels = np.asarray(labels, dtype=np.intp)
        if len(labels) and (labels.min() < 1 or labels.max() > self.num_classes):
            raise UnknownClass("label outside 1..%d" % self.num_classes)
        return self.centers[labels - 1]

    def copy(self):
        out = CenterBank(self.num_classes, self.dim, self.momentum,
                         self.occupancy_threshold)
        out.centers = self.centers.copy()
        return out

    def step(self, deltas):
        """Return a bank moved by -momentum * deltas (a class -> vector map)."""
        out = self.copy()
        for label, delta in deltas.items():
            out.centers[label - 1] = self.centers[label - 1] - self.momentum * delta
        return out


def center_loss(u, k, bank):
    """Sum over frames of the squared distance to the labeled class center."""
    u = np.asarray(u, dtype=float)
    d = u - bank.gather(k)
    return float((d * d).sum())


def cl_grad_features(u, k, bank):
    """Per-frame feature error signal of the center loss, u_t - c_{k_t}.

    Half of the true gradient; see the module note on the factor 2.
    """
    return np.asarray(u, dtype=float) - bank.gather(k)


def cross_entropy(y, cols):
    """Negative log probability of the labeled column, summed over frames.

    cols are 0-based column indices into y (callers with 1-based class
    ids map them down first).
    """
    y = np.asarray(y, dtype=float)
    cols = np.asarray(cols, dtype=np.intp)
    return float(-np.log(y[np.arange(len(cols)), cols]).sum())


def fmf_loss(y, cols, u, k, bank, cfg):
    """Framewise fusion: cross-entropy plus lambda times center loss."""
    if cfg.mode != "framewise":
        raise ValueError("fmf_loss requires framewise mode")
    return cross_entropy(y, cols) + cfg.lam * center_loss(u, k, bank)


def ecl(u, gamma, zp, bank):
    """Expected center loss: occupancy-weighted squared center distances.

    gamma is a (T, 2r+1) occupancy matrix aligned with the blank-extended
    sequence zp; blank positions carry no center and are skipped.
    """
    u = np.asarray(u, dtype=float)
    labels = zp[1::2]
    if len(labels) == 0:
        return 0.0
    d = u[:, None, :] - bank.gather(labels)[None, :, :]   # (T, r, D)
    return float((gamma[:, 1::2] * (d * d).sum(axis=2)).sum())


def tmf_loss(ml, ecl_value, cfg):
    """Sequence fusion: CTC likelihood loss plus lambda times ECL."""
    if cfg.mode != "temporal":
        raise ValueError("tmf_loss requires temporal mode")
    return ml + cfg.lam * ecl_value


def ecl_grad_features(u, gamma, zp, bank):
    """Per-frame feature error signal of the ECL (without the factor 2):

        delta(t) = sum_s gamma(t, s) * (u_t - c_{z'_s}),  blanks skipped.
    """
    u = np.asarray(u, dtype=float)
    labels = zp[1::2]
    if len(labels) == 0:
        return np.zeros_like(u)
    w = gamma[:, 1::2]                                    # (T, r)
    centers = bank.gather(labels)                         # (r, D)
    return w.sum(axis=1)[:, None] * u - w @ centers


def fuse_feature_grad(delta_ml, W, delta_ecl, cfg):
    """Fused error signal entering the second-last layer:

        delta = delta_ml W + lambda * delta_ecl

    (per frame: W^T delta_ml(t), plus the weighted center signal).
    """
    base = np.asarray(delta_ml, dtype=float) @ np.asarray(W, dtype=float)
    if cfg.lam == 0.0:
        return base
    return base + cfg.lam * np.asarray(delta_ecl, dtype=float)


def center_delta_tmf(bank, u, gamma, zp):
    """Raw center-update sums for one sequence, threshold-gated per term:

        delta_j = sum over positions s with z'_s = j, frames t with
                  gamma(t, s) >= threshold, of gamma(t, s) * (c_j - u_t)

    Returned as a class -> vector map so a batch can accumulate before a
    single momentum step.
    """
    u = np.asarray(u, dtype=float)
    deltas = {}
    for i, label in enumerate(zp[1::2]):
        label = int(label)
        w = gamma[:, 2 * i + 1]
        live = w >= bank.occupancy_threshold
        if not live.any():
            continue
        wl = w[live]
        c = bank.center(label)
        d = wl.sum() * c - wl @ u[live]
        deltas[label] = deltas.get(label, 0.0) + d
    return deltas


def update_centers_tmf(bank, u, gamma, zp):
    """Apply the occupancy-weighted center update for one sequence."""
    return bank.step(center_delta_tmf(bank, u, gamma, zp))


def center_delta_framewise(bank, u, k):
    """Per-class difference sums and counts for the framewise update."""
    u = np.asarray(u, dtype=float)
    k = np.asarray(k, dtype=np.intp)
    if len(k) and (k.min() < 1 or k.max() > bank.num_classes):
        raise UnknownClass("label outside 1..%d" % bank.num_classes)
    sums, counts = {}, {}
    for label in np.unique(k):
        label = int(label)
        mask = k == label
        n = int(mask.sum())
        sums[label] = n * bank.center(label) - u[mask].sum(axis=0)
        counts[label] = n
    return sums, counts


def update_centers_framewise(bank, u, k):
    """Count-normalized center update from framewise labels:

        c_j <- c_j - momentum * (sum over labeled frames of c_j - u_t)
                                / (1 + number of labeled frames)
    """
    sums, counts = center_delta_framewise(bank, u, k)
    deltas = {j: sums[j] / (1.0 + counts[j]) for j in sums}
    return bank.step(deltas)
