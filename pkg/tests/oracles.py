"""Independent oracles: deliberately naive routes used to freeze expected values.

Nothing here imports the solver code paths it checks; everything is a
direct transcription of a definition (double loops, dense grids, finite
differences, fixed-step proximal iterations).
"""

import numpy as np


def brute_force_pattern_sets(mask):
    """All (pattern -> (T, S)) pairs by double loop over subjects and patterns."""
    n = mask.shape[0]
    d_sets = [frozenset(np.flatnonzero(mask[i]).tolist()) for i in range(n)]
    out = {}
    for pat in set(d_sets):
        t = {i for i in range(n) if d_sets[i] == pat}
        s = {i for i in range(n) if pat <= d_sets[i]}
        out[pat] = (t, s)
    return out


def zoom_grid_argmax(f, dim, lo=-8.0, hi=8.0, pts=15, rounds=16):
    """Maximize f over a box by an iteratively refined dense grid.

    ``f`` takes an (m, dim) array of points and returns m values.  Each
    round evaluates a full pts**dim grid around the incumbent and shrinks
    the box to twice the cell width, so the final resolution is about
    (hi - lo) * (2 / (pts - 1)) ** rounds.
    """
    center = np.full(dim, (lo + hi) / 2.0)
    half = np.full(dim, (hi - lo) / 2.0)
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, pts) for c, h in zip(center, half)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        vals = f(grid)
        center = grid[int(np.argmax(vals))]
        half = half * (2.0 / (pts - 1))
    return center


def logistic_loglik_many(X, y, betas):
    """Row-wise logistic log-likelihood for an (m, p) array of coefficients."""
    theta = X @ betas.T
    return y @ theta - np.logaddexp(0.0, theta).sum(axis=0)


def logistic_mle_oracle(X, y, lo=-8.0, hi=8.0, rounds=16):
    """Brute-force logistic maximum likelihood via the zooming grid."""
    return zoom_grid_argmax(
        lambda b: logistic_loglik_many(X, y, b), X.shape[1], lo, hi, rounds=rounds
    )


def simplex_grid(K, step=0.01):
    """All weight vectors on the simplex with coordinates multiples of step."""
    m = round(1.0 / step)
    if K == 2:
        for i in range(m + 1):
            yield np.array([i, m - i], dtype=float) / m
        return
    if K == 3:
        for i in range(m + 1):
            for j in range(m - i + 1):
                yield np.array([i, j, m - i - j], dtype=float) / m
        return
    raise NotImplementedError("grid oracle implemented for K in {2, 3}")


def logistic_criterion_by_terms(theta_matrix, y, w, lam, p_sizes):
    """Remark-style logistic criterion computed probability by probability."""
    total = 0.0
    for i in range(theta_matrix.shape[0]):
        theta_i = float(theta_matrix[i] @ w)
        p_i = 1.0 / (1.0 + np.exp(-theta_i))
        total += y[i] * np.log(p_i) + (1.0 - y[i]) * np.log(1.0 - p_i)
    penalty = sum(w[k] * p_sizes[k] for k in range(len(w)))
    return -2.0 * total + lam * penalty


def bernoulli_kl2(mu, p_hat):
    """Twice the summed Bernoulli KL divergence, term by term."""
    total = 0.0
    for m, p in zip(np.atleast_1d(mu), np.atleast_1d(p_hat)):
        total += m * np.log(m / p) + (1.0 - m) * np.log((1.0 - m) / (1.0 - p))
    return 2.0 * total


def central_difference_gradient(f, x, h=1e-6):
    g = np.zeros_like(x, dtype=float)
    for j in range(x.size):
        e = np.zeros_like(g)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def softmax_ic_weights(ic):
    """Literal exp(-IC/2) normalization (no stabilization)."""
    raw = np.exp(-0.5 * np.asarray(ic, dtype=float))
    return raw / raw.sum()


def slow_logistic_group_lasso(X, y, lam, groups, iters=300000):
    """Fixed-step ISTA for the logistic group lasso, run to high precision.

    Independent of the package solver: no backtracking, no momentum, no
    warm starts; the step comes from the 1/4-bound on the logistic
    Hessian.
    """
    n, p = X.shape
    step = 1.0 / (0.25 * np.linalg.norm(X, 2) ** 2)
    beta = np.zeros(p)
    for _ in range(iters):
        prob = 1.0 / (1.0 + np.exp(-(X @ beta)))
        grad = X.T @ (prob - y)
        z = beta - step * grad
        new = z.copy()
        for g in groups:
            norm = np.linalg.norm(z[g])
            t = step * lam * np.sqrt(len(g))
            new[g] = 0.0 if norm <= t else z[g] * (1.0 - t / norm)
        if np.max(np.abs(new - beta)) < 1e-14:
            beta = new
            break
        beta = new
    return beta


def logistic_group_lasso_objective(X, y, beta, lam, groups):
    theta = X @ beta
    nll = float(np.sum(np.logaddexp(0.0, theta)) - y @ theta)
    return nll + lam * sum(np.sqrt(len(g)) * np.linalg.norm(beta[g]) for g in groups)
