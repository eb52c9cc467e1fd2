"""Log-space CTC dynamic programming.

Conventions used throughout:

* Class 0 is the blank; real labels are 1..K-1.
* A label sequence ``z`` of length r is expanded to the modified sequence
  ``z' = (blank, z[0], blank, z[1], ..., blank)`` of length 2r+1.  Even
  positions are blanks, odd position 2i+1 holds z[i].
* ``log_alpha[t, s]`` / ``log_beta[t, s]`` follow the classic inclusive
  convention: both include the emission at frame t, so
  ``alpha_t(s) * beta_t(s) = (mass of paths through (s, t)) * y_t[z'_s]``
  and for every frame ``sum_s alpha_t(s) beta_t(s) / y_t[z'_s] = p(z|x)``.
  The extra emission factor is divided out wherever a true path mass is
  needed (gradients); the raw product is what the occupancy matrix exposes
  in its literal mode.
"""

import numpy as np

BLANK = 0


class InfeasibleLabeling(Exception):
    """The label sequence cannot be aligned to the given number of frames."""


class DegenerateFrame(Exception):
    """Every alignment weight at some frame underflowed to zero."""


def extend_with_blanks(labels):
    """Interleave blanks around and between the labels.

    ``[a, b]`` becomes ``[0, a, 0, b, 0]``; the empty sequence becomes
    ``[0]``.
    """
    labels = np.asarray(labels, dtype=np.intp)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if np.any(labels == BLANK):
        raise ValueError("labels must not contain the blank index 0")
    zp = np.full(2 * len(labels) + 1, BLANK, dtype=np.intp)
    zp[1::2] = labels
    return zp


def min_frames(labels):
    """Minimum number of frames an alignment for ``labels`` needs.

    Each label takes one frame, plus one mandatory blank frame between
    every adjacent repeated pair.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 1
    repeats = int(np.sum(labels[1:] == labels[:-1]))
    return len(labels) + repeats


def _skip_allowed(zp):
    """Boolean mask over positions s: the s-2 -> s transition is legal.

    Legal when z'_s is a label that differs from z'_{s-2}; blanks and
    repeated labels must pass through the intermediate position.
    """
    n = len(zp)
    allowed = np.zeros(n, dtype=bool)
    if n > 2:
        allowed[2:] = (zp[2:] != BLANK) & (zp[2:] != zp[:-2])
    return allowed


class AlignmentTables:
    """Forward/backward tables for one (posterior, label-sequence) pair."""

    def __init__(self, log_alpha, log_beta, log_seq_prob, zp):
        self.log_alpha = log_alpha
        self.log_beta = log_beta
        self.log_seq_prob = log_seq_prob
        self.zp = zp


def forward_backward(y, labels):
    """Run the CTC forward and backward recursions in log space.

    y : (T, K) array of per-frame class probabilities, all entries > 0.
    labels : label sequence without blanks.

    Returns AlignmentTables; raises InfeasibleLabeling when the labels
    cannot fit into T frames.
    """
    y = np.asarray(y, dtype=float)
    T, K = y.shape
    if np.any(y <= 0.0):
        raise ValueError("posterior entries must be strictly positive")
    labels = np.asarray(labels, dtype=np.intp)
    if len(labels) and (labels.min() < 1 or labels.max() >= K):
        raise ValueError("labels out of range for %d classes" % K)
    if min_frames(labels) > T:
        raise InfeasibleLabeling(
            "need at least %d frames for %d labels, got %d"
            % (min_frames(labels), len(labels), T)
        )

    zp = extend_with_blanks(labels)
    S = len(zp)
    ly = np.log(y)
    lyz = ly[:, zp]                       # (T, S) emission log-probs per position
    skip = _skip_allowed(zp)
    neg = -np.inf

    log_alpha = np.full((T, S), neg)
    log_alpha[0, 0] = lyz[0, 0]
    if S > 1:
        log_alpha[0, 1] = lyz[0, 1]
    for t in range(1, T):
        prev = log_alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        log_alpha[t] = acc + lyz[t]

    log_beta = np.full((T, S), neg)
    log_beta[T - 1, S - 1] = lyz[T - 1, S - 1]
    if S > 1:
        log_beta[T - 1, S - 2] = lyz[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = log_beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        log_beta[t] = acc + lyz[t]

    if S > 1:
        log_seq_prob = np.logaddexp(log_alpha[T - 1, S - 1], log_alpha[T - 1, S - 2])
    else:
        log_seq_prob = log_alpha[T - 1, 0]
    return AlignmentTables(log_alpha, log_beta, float(log_seq_prob), zp)


def occupancy(tables, y, mode="paper_literal"):
    """Per-(frame, position) alignment weights from the DP tables.

    mode="paper_literal" returns the raw product alpha_t(s) * beta_t(s);
    mode="frame_normalized" divides each frame's row by its sum so rows
    sum to one.  Cells outside the feasible band are zero either way.
    """
    la, lb = tables.log_alpha, tables.log_beta
    prod = la + lb
    if mode == "paper_literal":
        return np.exp(prod)
    if mode == "frame_normalized":
        m = prod.max(axis=1, keepdims=True)
        scaled = np.exp(prod - m)
        return scaled / scaled.sum(axis=1, keepdims=True)
    raise ValueError("unknown occupancy mode %r" % (mode,))


def ml_loss(pairs):
    """Negative log likelihood summed over (posterior, labels) pairs."""
    total = 0.0
    for y, labels in pairs:
        total -= forward_backward(y, labels).log_seq_prob
    return total


def ctc_grad_logits(tables, y):
    """Error signal at the pre-softmax layer: y_t^k minus the posterior
    occupancy of class k at frame t.

    The occupancy ratio divides the emission factor back out of the
    stored alpha*beta products, so each frame's ratio row is the exact
    distribution over classes of paths through that frame and the result
    is the exact gradient of the negative log likelihood w.r.t. logits.
    """
    y = np.asarray(y, dtype=float)
    T, K = y.shape
    zp = tables.zp
    log_mass = tables.log_alpha + tables.log_beta - np.log(y)[:, zp]
    peak = log_mass.max(axis=1)
    if np.any(~np.isfinite(peak)):
        t_bad = int(np.flatnonzero(~np.isfinite(peak))[0])
        raise DegenerateFrame("alignment mass vanished at frame %d" % t_bad)
    mass = np.exp(log_mass - peak[:, None])
    denom = mass.sum(axis=1)
    ratio = np.zeros((T, K))
    for s, sym in enumerate(zp):
        ratio[:, sym] += mass[:, s]
    ratio /= denom[:, None]
    return y - ratio
