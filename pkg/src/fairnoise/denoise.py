"""Explicit relabeling baseline: denoise the sensitive attribute before
fair training (simplified confidence-rank stand-in for prune-and-reweight
denoisers; comparative benchmark role only, labeled "denoise (simplified)"
in all outputs).
"""

from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import EmptySlice
from .estimation import EstimatorConfig, fit_posterior

LABEL = "denoise (simplified)"


@dataclass(frozen=True)
class DenoiseReport:
    """Relabel counts per direction and the affected sample fraction."""

    n_to_0: int
    n_to_1: int
    group_size_1: int
    group_size_0: int
    fraction_relabeled: float
    entire_group_relabeled: bool


def denoise_ccn(data, rates, config=EstimatorConfig()):
    """Relabel the most suspect sensitive bits given CCN rates.

    Fits the group-membership posterior, then flips the ceil(rho+ * |A=1|)
    lowest-posterior members of the apparent A=1 group to 0 and the
    ceil(rho- * |A=0|) highest-posterior members of the apparent A=0 group
    to 1. Ranking uses the posterior's raw score (the calibrated
    probability is piecewise constant, which would tie whole blocks);
    score ties break by original index order. Features and targets are
    untouched.
    """
    if len(data) == 0:
        raise EmptySlice("cannot denoise empty data")
    idx1 = np.flatnonzero(data.sensitive == 1)
    idx0 = np.flatnonzero(data.sensitive == 0)
    if len(idx1) == 0 or len(idx0) == 0:
        raise EmptySlice("both apparent groups must be present")

    model = fit_posterior(data, condition_on_y1=False, config=config)
    eta = model.scores(data.features, data.target)

    k1 = min(len(idx1), ceil(rates.rho_plus * len(idx1)))
    k0 = min(len(idx0), ceil(rates.rho_minus * len(idx0)))

    new_a = data.sensitive.copy()
    if k1 > 0:
        order = idx1[np.lexsort((idx1, eta[idx1]))]
        new_a[order[:k1]] = 0
    if k0 > 0:
        order = idx0[np.lexsort((idx0, -eta[idx0]))]
        new_a[order[:k0]] = 1

    report = DenoiseReport(
        n_to_0=int(k1), n_to_1=int(k0),
        group_size_1=int(len(idx1)), group_size_0=int(len(idx0)),
        fraction_relabeled=float((k1 + k0) / len(data)),
        entire_group_relabeled=bool(k1 == len(idx1) or k0 == len(idx0)))
    return data.with_sensitive(new_a), report
