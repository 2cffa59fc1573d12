"""Noise-rate estimation from corrupted data alone.

Under CCN flips of the sensitive bit the observed group-membership
posterior satisfies eta_corr(x) = rho- + (1 - rho+ - rho-) eta(x), so on
data containing anchor points (instances whose clean posterior is 0 or 1)
the extremes of a calibrated estimate of eta_corr identify the rates:
rho- at the bottom, 1 - rho+ at the top. Robust low/high quantiles stand
in for the strict extrema.

The posterior is a regularized logistic scorer whose outputs are
recalibrated by equal-count binning of the training scores, which keeps
the estimate inside the empirically observed rate range.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._logit import fit_logistic, log_loss, sigmoid
from .core import Dataset
from .errors import (DegenerateEstimateWarning, EmptySlice,
                     NonConvergenceWarning, ValidationError)
from .noise import CCNNoise, EOConditionalNoise, ccn_to_mc_from_corrupted

_CLAMP = 1e-6
_MAX_RATE_SUM = 1.0 - 1e-3


@dataclass(frozen=True)
class EstimatorConfig:
    """Posterior fit and quantile settings.

    ``regularization=None`` means the 1/n default. The anchor quantiles
    (0.005, 0.995) are used instead of the strict min/max for outlier
    robustness.
    """

    regularization: float = None
    max_iter: int = 1000
    grad_tol: float = 1e-6
    learning_rate: float = 1.0
    n_bins: int = 20
    min_bin_count: int = 1000
    anchor_quantile: float = 0.005

    def __post_init__(self):
        if self.regularization is not None and self.regularization < 0:
            raise ValidationError("regularization must be >= 0")
        if self.max_iter < 1 or self.n_bins < 1 or self.min_bin_count < 1:
            raise ValidationError("max_iter, n_bins and min_bin_count must be >= 1")
        if not 0.0 < self.anchor_quantile < 0.5:
            raise ValidationError("anchor_quantile must lie in (0, 0.5)")


@dataclass(frozen=True)
class PosteriorModel:
    """Calibrated estimate of P[A_corr = 1 | features (, Y)].

    ``predict_proba`` returns the bin-calibrated posterior, clamped to
    [1e-6, 1 - 1e-6]. ``iterations``/``final_loss``/``converged`` record
    the underlying logistic fit.
    """

    coef: np.ndarray
    intercept: float
    bin_upper_scores: np.ndarray
    bin_rates: np.ndarray
    uses_target_feature: bool
    iterations: int
    final_loss: float
    converged: bool

    def scores(self, features, target=None):
        """Raw (uncalibrated) posterior scores; monotone in the posterior."""
        X = np.asarray(features, dtype=float)
        if self.uses_target_feature:
            if target is None:
                raise ValidationError("this posterior needs the target column")
            X = np.column_stack([X, np.asarray(target, dtype=float)])
        return X @ self.coef + self.intercept

    def predict_proba(self, features, target=None):
        s = self.scores(features, target)
        idx = np.searchsorted(self.bin_upper_scores[:-1], s, side="left")
        return np.clip(self.bin_rates[idx], _CLAMP, 1.0 - _CLAMP)


def fit_posterior(data, condition_on_y1=False, config=EstimatorConfig()):
    """Fit the calibrated group-membership posterior on (possibly corrupted)
    data.

    When ``condition_on_y1`` the fit is restricted to the Y=1 slice;
    otherwise Y enters as an extra feature. Deterministic given the config
    and the data order. Hitting the iteration cap with the gradient norm
    above tolerance emits a ``NonConvergenceWarning`` (the model is still
    returned).
    """
    if len(data) == 0:
        raise EmptySlice("cannot fit a posterior on empty data")
    if condition_on_y1:
        mask = data.target == 1
        if not mask.any():
            raise EmptySlice("Y=1 slice is empty")
        X = data.features[mask]
        t = data.sensitive[mask].astype(float)
        uses_y = False
    else:
        X = np.column_stack([data.features, data.target.astype(float)])
        t = data.sensitive.astype(float)
        uses_y = True

    n = len(t)
    reg = (1.0 / n) if config.regularization is None else config.regularization
    coef, b, iters, gnorm = fit_logistic(
        X, t, np.full(n, 1.0 / n), reg=reg, lr=config.learning_rate,
        max_iter=config.max_iter, tol=config.grad_tol, accelerated=True)
    converged = gnorm <= config.grad_tol
    if not converged:
        warnings.warn(
            f"posterior fit hit the iteration cap ({config.max_iter}) with "
            f"gradient norm {gnorm:.3g}", NonConvergenceWarning, stacklevel=2)

    scores = X @ coef + b
    order = np.argsort(scores, kind="stable")
    # bins need enough mass that their empirical rates concentrate; with
    # fewer than min_bin_count examples per bin the extremes are noise
    # (two bins minimum, so small samples stay directional)
    n_bins = min(n, min(config.n_bins, max(2, n // config.min_bin_count)))
    uppers, sums, counts = [], [], []
    for chunk in np.array_split(order, n_bins):
        if len(chunk) == 0:
            continue
        top = float(scores[chunk].max())
        if uppers and top == uppers[-1]:
            # score ties must not straddle a bin boundary
            sums[-1] += float(t[chunk].sum())
            counts[-1] += len(chunk)
        else:
            uppers.append(top)
            sums.append(float(t[chunk].sum()))
            counts.append(len(chunk))
    rates = np.array(sums) / np.array(counts)
    return PosteriorModel(coef, float(b), np.array(uppers), rates,
                          uses_y, iters, log_loss(sigmoid(scores), t), converged)


def _quantile_rates(eta, q):
    lo = float(np.quantile(eta, q))
    hi = float(np.quantile(eta, 1.0 - q))
    rho_minus = max(lo, 0.0)
    rho_plus = max(1.0 - hi, 0.0)
    if rho_plus + rho_minus >= _MAX_RATE_SUM:
        shrink = _MAX_RATE_SUM / (rho_plus + rho_minus)
        warnings.warn(
            "estimated rates were clamped to keep rho+ + rho- below 1 "
            f"(shrunk by {shrink:.4f}); estimates are unreliable",
            DegenerateEstimateWarning, stacklevel=3)
        rho_plus *= shrink
        rho_minus *= shrink
    return rho_plus, rho_minus


def estimate_ccn_rates(data, config=EstimatorConfig()):
    """Anchor-point estimate of the CCN flip rates from corrupted data."""
    if len(data) == 0:
        raise EmptySlice("cannot estimate on empty data")
    if not ((data.sensitive == 0).any() and (data.sensitive == 1).any()):
        raise EmptySlice("both apparent groups must be present")
    model = fit_posterior(data, condition_on_y1=False, config=config)
    eta = model.predict_proba(data.features, data.target)
    rho_plus, rho_minus = _quantile_rates(eta, config.anchor_quantile)
    return CCNNoise(rho_plus, rho_minus)


def estimate_eo_rates(data, config=EstimatorConfig()):
    """Anchor-point estimate of the EO-conditional mixture weights.

    Runs the CCN estimator restricted to the Y=1 slice, then converts the
    rates through the slice's observed (corrupted) base rate. The Y=1
    corruption is itself an MC model, so its mixture weights are exactly
    the EO-conditional parameters.
    """
    mask = data.target == 1
    if not mask.any():
        raise EmptySlice("Y=1 slice is empty")
    sliced = data.subset(mask)
    if not ((sliced.sensitive == 0).any() and (sliced.sensitive == 1).any()):
        raise EmptySlice("Y=1 slice must contain both apparent groups")
    model = fit_posterior(data, condition_on_y1=True, config=config)
    eta = model.predict_proba(sliced.features)
    rho_plus, rho_minus = _quantile_rates(eta, config.anchor_quantile)
    mc, _ = ccn_to_mc_from_corrupted(CCNNoise(rho_plus, rho_minus),
                                     sliced.base_rate())
    return EOConditionalNoise(mc.alpha, mc.beta)
