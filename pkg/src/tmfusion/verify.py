"""Cross-validation suites: every DP table, loss value, and analytic
gradient against its brute-force or finite-difference reference.

Each suite returns (max_error, instance_count); the CLI `check`
subcommand wraps them with tolerances and exit codes, and the test suite
calls them directly.
"""

import numpy as np

from . import ctc, losses, model, oracle


def _random_posteriors(rng, T, K):
    y = rng.uniform(0.1, 1.0, (T, K))
    return y / y.sum(axis=1, keepdims=True)


def _random_labels(rng, K, T, r_max):
    while True:
        r = int(rng.integers(0, r_max + 1))
        z = rng.integers(1, K, r)
        if ctc.min_frames(z) <= T:
            return z


def seq_prob_suite(n=200, seed=0):
    """DP sequence probability vs. path enumeration, probability domain."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 5))
        T = int(rng.integers(2, 7))
        y = _random_posteriors(rng, T, K)
        z = _random_labels(rng, K, T, 3)
        dp = np.exp(ctc.forward_backward(y, z).log_seq_prob)
        bf = oracle.brute_force_seq_prob(y, z)
        worst = max(worst, abs(dp - bf))
    return worst, n


def occupancy_suite(n=100, seed=1):
    """DP literal occupancy and ECL vs. their brute-force counterparts."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 4))
        T = int(rng.integers(2, 6))
        y = _random_posteriors(rng, T, K)
        z = _random_labels(rng, K, T, 2)
        tables = ctc.forward_backward(y, z)
        gamma = ctc.occupancy(tables, y, "paper_literal")
        occ = oracle.brute_force_occupancy(y, z)
        worst = max(worst, float(np.abs(gamma - occ).max()))

        D = 3
        u = rng.normal(size=(T, D))
        bank = losses.CenterBank(K - 1, D)
        bank.centers = rng.normal(size=bank.centers.shape)
        dp_ecl = losses.ecl(u, gamma, tables.zp, bank)
        bf_ecl = oracle.brute_force_ecl(
            y, z, u, {j: bank.center(j) for j in range(1, K)})
        worst = max(worst, abs(dp_ecl - bf_ecl))
    return worst, n


def partition_suite(n=20, K=3, T=5, seed=2):
    """Sum of DP probabilities over every labeling equals one."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        y = _random_posteriors(rng, T, K)
        total = 0.0
        for z in oracle.all_label_sequences(K - 1, T):
            if ctc.min_frames(np.array(z)) > T:
                continue
            total += np.exp(ctc.forward_backward(y, np.array(z)).log_seq_prob)
        worst = max(worst, abs(total - 1.0))
    return worst, n


def consistency_suite(n=100, seed=3):
    """Per-frame forward-backward identity: summing alpha*beta with the
    emission divided out reproduces the sequence log probability."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 6))
        T = int(rng.integers(2, 10))
        y = _random_posteriors(rng, T, K)
        z = _random_labels(rng, K, T, 4)
        tables = ctc.forward_backward(y, z)
        stack = tables.log_alpha + tables.log_beta - np.log(y)[:, tables.zp]
        peak = stack.max(axis=1, keepdims=True)
        lse = (peak[:, 0] + np.log(np.exp(stack - peak).sum(axis=1)))
        worst = max(worst, float(np.abs(lse - tables.log_seq_prob).max()))
    return worst, n


def grad_ml_suite(n=50, seed=4):
    """Softmax-layer CTC error signal vs. finite differences of the
    likelihood loss with respect to the logits."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 5))
        T = int(rng.integers(2, 6))
        z = _random_labels(rng, K, T, 2)
        logits = rng.normal(size=(T, K))

        def loss_of(flat):
            y = model.softmax(flat.reshape(T, K))
            return -ctc.forward_backward(y, z).log_seq_prob

        y = model.softmax(logits)
        tables = ctc.forward_backward(y, z)
        analytic = ctc.ctc_grad_logits(tables, y).ravel()
        fd = oracle.finite_diff(loss_of, logits.ravel())
        worst = max(worst, _rel_err(analytic, fd))
    return worst, n


def grad_ecl_suite(n=50, seed=5):
    """Feature-space ECL error signal (doubled, to undo the absorbed
    factor) vs. finite differences of the ECL value."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 5))
        T = int(rng.integers(2, 6))
        D = int(rng.integers(2, 5))
        y = _random_posteriors(rng, T, K)
        z = _random_labels(rng, K, T, 2)
        tables = ctc.forward_backward(y, z)
        gamma = ctc.occupancy(tables, y, "paper_literal")
        bank = losses.CenterBank(K - 1, D)
        bank.centers = rng.normal(size=bank.centers.shape)
        u = rng.normal(size=(T, D))

        def ecl_of(flat):
            return losses.ecl(flat.reshape(T, D), gamma, tables.zp, bank)

        analytic = 2.0 * losses.ecl_grad_features(u, gamma, tables.zp, bank).ravel()
        fd = oracle.finite_diff(ecl_of, u.ravel())
        worst = max(worst, _rel_err(analytic, fd))
    return worst, n


def tmf_network_loss(state, bank, x, z, lam, occupancy_mode="paper_literal",
                     frozen_gamma=None):
    """Fused sequence loss for one input.  With frozen_gamma the
    occupancy weights are held fixed (how the learning rule treats them);
    otherwise they are recomputed from the current posteriors."""
    u, _, y = model.forward(state, x)
    tables = ctc.forward_backward(y, z)
    gamma = frozen_gamma
    if gamma is None:
        gamma = ctc.occupancy(tables, y, occupancy_mode)
    return -tables.log_seq_prob + lam * losses.ecl(u, gamma, tables.zp, bank)


def grad_full_suite(n=50, seed=6, lam=0.05):
    """Whole-network chain: the fused error signal pushed through
    backward() vs. finite differences of the fused loss over every
    parameter.  Occupancy weights and centers are frozen at the base
    point (they are updated by their own rules, not differentiated), and
    the feature-space signal is doubled to undo the absorbed factor."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        spec = model.NetworkSpec(input_dim=4, hidden=[5], num_classes=4,
                                 recurrent=bool(i % 2))
        state = model.ModelState(spec, seed=int(rng.integers(1 << 30)))
        T = 5
        x = rng.normal(size=(T, spec.input_dim))
        z = _random_labels(rng, spec.num_classes, T, 2)
        bank = losses.CenterBank(spec.num_classes - 1, spec.feature_dim)
        bank.centers = rng.normal(size=bank.centers.shape)

        u, _, y = model.forward(state, x)
        tables = ctc.forward_backward(y, z)
        gamma = ctc.occupancy(tables, y, "paper_literal")
        delta_ml = ctc.ctc_grad_logits(tables, y)
        delta_ecl = losses.ecl_grad_features(u, gamma, tables.zp, bank)
        cfg2 = losses.FusionConfig(lam=2.0 * lam, mode="temporal")
        fused = losses.fuse_feature_grad(delta_ml, state.params["W"], delta_ecl, cfg2)
        grads = model.backward(state, delta_ml, fused)
        analytic = np.concatenate([grads[k].ravel() for k in state.param_names()])

        base = state.flat_params()

        def loss_of(flat):
            state.set_flat_params(flat)
            try:
                return tmf_network_loss(state, bank, x, z, lam, frozen_gamma=gamma)
            finally:
                state.set_flat_params(base)

        fd = oracle.finite_diff(loss_of, base)
        worst = max(worst, _rel_err(analytic, fd))
    return worst, n


def _rel_err(a, b):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / scale)


SUITES = {
    "seq_prob": (seq_prob_suite, 1e-10, "ctc"),
    "occupancy_ecl": (occupancy_suite, 1e-9, "ctc"),
    "partition": (partition_suite, 1e-9, "ctc"),
    "consistency": (consistency_suite, 1e-8, "ctc"),
    "grad_ml": (grad_ml_suite, 1e-5, "losses"),
    "grad_ecl": (grad_ecl_suite, 1e-5, "losses"),
    "grad_full": (grad_full_suite, 1e-4, "model"),
}


def run_suites(scope="all"):
    """Run the selected suites; yields (name, max_err, tolerance, ok)."""
    for name, (fn, tol, tag) in SUITES.items():
        if scope != "all" and tag != scope:
            continue
        err, _ = fn()
        yield name, err, tol, err <= tol
