"""Weighted logistic regression by full-batch gradient descent.

Shared base learner for the fair trainer, the posterior estimator and the
denoiser. Targets may be soft (in [0, 1]); example weights must be
nonnegative. The step size is normalised by the standard curvature bound
0.25 * max_i ||x_i||^2 + reg, so ``lr=1.0`` is a safe default for any
feature scale.
"""

import numpy as np


def sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(X, targets, weights, reg=0.0, lr=1.0, max_iter=200, tol=0.0,
                 coef0=None, intercept0=0.0, accelerated=False):
    """Minimise sum_i w_i * CE(sigmoid(x_i.w + b), t_i) / sum(w) + reg/2 ||w||^2.

    The intercept is not penalised. Returns (coef, intercept, n_iter,
    grad_norm) where grad_norm is the final gradient norm (used by callers
    that report convergence). ``accelerated`` switches to Nesterov momentum
    with gradient restarts (used by the posterior estimator, which needs a
    tight gradient tolerance).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    wn = np.asarray(weights, dtype=float)
    wn = wn / wn.sum()
    t = np.asarray(targets, dtype=float)
    z = np.zeros(d + 1)
    if coef0 is not None:
        z[:d] = coef0
    z[d] = intercept0
    row_sq = (X * X).sum(axis=1) + 1.0
    step = lr / (0.25 * row_sq.max() + reg)

    def grad(v):
        p = sigmoid(X @ v[:d] + v[d])
        g = wn * (p - t)
        out = np.empty(d + 1)
        out[:d] = X.T @ g + reg * v[:d]
        out[d] = g.sum()
        return out

    gnorm = np.inf
    it = 0
    if not accelerated:
        for it in range(1, max_iter + 1):
            g = grad(z)
            gnorm = float(np.sqrt(g @ g))
            if tol > 0.0 and gnorm <= tol:
                break
            z -= step * g
        return z[:d], float(z[d]), it, gnorm

    y = z.copy()
    momentum = 0.0
    for it in range(1, max_iter + 1):
        g = grad(y)
        gnorm = float(np.sqrt(g @ g))
        if tol > 0.0 and gnorm <= tol:
            z = y
            break
        z_new = y - step * g
        delta = z_new - z
        # gradient restart keeps the momentum from overshooting
        momentum = 0.0 if g @ delta > 0.0 else momentum + 1.0
        y = z_new + (momentum / (momentum + 3.0)) * delta
        z = z_new
    return z[:d], float(z[d]), it, gnorm


def log_loss(p, t, eps=1e-12):
    p = np.clip(p, eps, 1.0 - eps)
    return float(np.mean(-t * np.log(p) - (1.0 - t) * np.log(1.0 - p)))
