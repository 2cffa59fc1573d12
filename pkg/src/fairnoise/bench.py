"""Benchmark harness: data ingestion, synthetic generation, exact oracles
and the nocor / cor / cor_scale / denoise sweep.

Measurement protocol: corruption touches only the training split's
sensitive attribute; fairness violations and errors are always computed
against the true uncorrupted attributes, on both splits. Splits are
random 80-20 by default with the split seed equal to base_seed plus the
repetition index.
"""

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (Criterion, Dataset, DiscretePopulation, FairnessLoss,
                   FairnessSpec, accuracy_risk, ddp, deo, disparity)
from .denoise import denoise_ccn
from .errors import (EmptyDataset, FairnoiseError, FairnoiseWarning,
                     ParseError, SchemaError, ValidationError)
from .estimation import EstimatorConfig, estimate_ccn_rates
from .fairtrain import TrainConfig, train_fair, train_fair_noisy
from .noise import CCNNoise, inject_ccn

METHODS = ("nocor", "cor", "cor_scale", "denoise")
RESULT_COLUMNS = ("method", "tau", "tau_prime", "rho_plus_hat",
                  "rho_minus_hat", "split", "fairness_violation", "error",
                  "seed", "repetition")
AGG_COLUMNS = ("method", "tau", "rho_plus_hat", "rho_minus_hat", "split",
               "n", "mean_fairness_violation", "std_fairness_violation",
               "mean_error", "std_error")

_CELL_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SyntheticConfig:
    """Gaussian-mixture sample: cell proportions over (A, Y) in the order
    (0,0), (0,1), (1,0), (1,1), one mean vector per cell, shared isotropic
    variance."""

    means: tuple
    proportions: tuple
    variance: float
    n: int
    seed: int

    def __post_init__(self):
        if len(self.means) != 4 or len(self.proportions) != 4:
            raise ValidationError("means and proportions need 4 entries")
        d = len(self.means[0])
        if any(len(m) != d for m in self.means):
            raise ValidationError("mean vectors must share one dimension")
        p = np.array(self.proportions, dtype=float)
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("proportions must be nonnegative and sum to 1")
        if self.variance <= 0:
            raise ValidationError("variance must be > 0")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        object.__setattr__(self, "means", tuple(tuple(float(x) for x in m)
                                                for m in self.means))
        object.__setattr__(self, "proportions", tuple(float(x) for x in p))


def synth_generate(config):
    """Draw the sample: cell indices first (multinomial on the proportions),
    then Gaussian features around the cell means. Deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    cells = rng.choice(4, size=config.n, p=np.array(config.proportions))
    means = np.array(config.means, dtype=float)[cells]
    X = means + rng.normal(0.0, math.sqrt(config.variance),
                           size=(config.n, means.shape[1]))
    a = [_CELL_ORDER[c][0] for c in cells]
    y = [_CELL_ORDER[c][1] for c in cells]
    return Dataset(X, a, y)


def disparity_synthetic_config(n=4000, seed=23, base_rate=0.25, p_y1_a1=0.65,
                               p_y1_a0=0.25):
    """Synthetic family with a group-correlated feature, calibrated so the
    unconstrained logistic fit has DDP in [0.3, 0.5] (the fairness
    constraint is active across the benchmark tau grid).

    Features: x1 carries the target signal, x2 a mixed signal, x3 the
    group signal (which also gives the denoiser's posterior something to
    rank on), x4 is noise.
    """
    means = []
    for a, y in _CELL_ORDER:
        sy, sa = 2.0 * y - 1.0, 2.0 * a - 1.0
        means.append((1.2 * sy, 0.8 * sy + 0.5 * sa, 1.0 * sa, 0.0))
    pi = base_rate
    props = ((1 - pi) * (1 - p_y1_a0), (1 - pi) * p_y1_a0,
             pi * (1 - p_y1_a1), pi * p_y1_a1)
    return SyntheticConfig(tuple(means), props, 1.0, n, seed)


def default_synthetic_config():
    """The shipped default benchmark sample (n=4000)."""
    return disparity_synthetic_config()


def anchor_synthetic_config(n=20000, seed=3, separation=2.0):
    """Synthetic family with anchor regions: the group feature's class
    means sit ``2 * separation`` standard deviations apart, so the tails
    are pure-group regions where P[A=1 | x] reaches 0 or 1 (what the
    noise-rate estimator needs)."""
    means = []
    for a, y in _CELL_ORDER:
        sy, sa = 2.0 * y - 1.0, 2.0 * a - 1.0
        means.append((separation * sa, 0.8 * sy))
    props = (0.3, 0.2, 0.2, 0.3)  # P[A=1]=0.5, P[Y=1|A=1]=0.6, P[Y=1|A=0]=0.4
    return SyntheticConfig(tuple(means), props, 1.0, n, seed)


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path, drop_missing=False):
    """Load a dataset from CSV: numeric feature columns plus a `sensitive`
    and a `label` column, both binary. Row order is preserved.

    Missing cells are a ``ParseError`` unless ``drop_missing`` removes the
    affected rows; non-numeric cells are always errors. Returns the
    dataset; feature column order follows the file.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv(fh, drop_missing)


def _parse_csv(fh, drop_missing):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("CSV file has no header row") from None
    header = [h.strip() for h in header]
    for required in ("sensitive", "label"):
        if required not in header:
            raise SchemaError(f"CSV header is missing the {required!r} column")
    if len(set(header)) != len(header):
        raise SchemaError("CSV header has duplicate column names")
    a_col = header.index("sensitive")
    y_col = header.index("label")
    feat_cols = [i for i in range(len(header)) if i not in (a_col, y_col)]

    feats, sens, labels = [], [], []
    for rownum, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ParseError("wrong number of cells", row=rownum)
        if any(cell.strip() == "" for cell in row):
            if drop_missing:
                continue
            col = next(header[i] for i, c in enumerate(row) if c.strip() == "")
            raise ParseError("missing value", row=rownum, column=col)
        parsed = []
        for i, cell in enumerate(row):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", row=rownum,
                                 column=header[i]) from None
        for i, name in ((a_col, "sensitive"), (y_col, "label")):
            if parsed[i] not in (0.0, 1.0):
                raise SchemaError(
                    f"{name} must be 0 or 1, got {parsed[i]} at row {rownum}")
        feats.append([parsed[i] for i in feat_cols])
        sens.append(int(parsed[a_col]))
        labels.append(int(parsed[y_col]))
    if not feats:
        raise EmptyDataset("CSV file contains no data rows")
    return Dataset(np.array(feats, dtype=float), sens, labels)


def write_csv(data, path, feature_names=None):
    """Write a dataset as CSV (features, then sensitive, then label).

    Floats use repr, so a write-then-load round trip is bit-exact.
    """
    d = data.dimension
    names = list(feature_names) if feature_names else [f"x{i}" for i in range(d)]
    if len(names) != d:
        raise ValidationError("feature_names length must match the dimension")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["sensitive", "label"])
        for i in range(len(data)):
            writer.writerow([repr(float(v)) for v in data.features[i]]
                            + [int(data.sensitive[i]), int(data.target[i])])


# ---------------------------------------------------------------------------
# Exact oracles


def materialize(pop, denominator):
    """Dataset realising a population whose masses are integer multiples of
    1/denominator; empirical metrics on it equal population metrics
    exactly."""
    counts = np.asarray(pop.mass) * denominator
    rounded = np.rint(counts)
    if np.abs(counts - rounded).max() > 1e-6:
        raise ValidationError(
            "population masses are not integer multiples of 1/denominator")
    feats, a, y = [], [], []
    for i, c in enumerate(rounded.astype(int)):
        for _ in range(c):
            feats.append(pop.features[i])
            a.append(int(pop.sensitive[i]))
            y.append(int(pop.target[i]))
    return Dataset(np.array(feats, dtype=float), a, y)


def population_oracle(pop, scorer):
    """Exact mass-weighted (ddp, deo, risk) of a scorer on a population."""
    return (ddp(pop, scorer), deo(pop, scorer), accuracy_risk(pop, scorer))


def mix_populations(pop_a, pop_b, weight_a):
    """Mixture weight_a * pop_a + (1-weight_a) * pop_b, cells merged."""
    if not 0.0 <= weight_a <= 1.0:
        raise ValidationError("weight_a must lie in [0, 1]")
    merged = {}
    for pop, w in ((pop_a, weight_a), (pop_b, 1.0 - weight_a)):
        for i in range(pop.n_cells):
            key = (tuple(pop.features[i]), int(pop.sensitive[i]),
                   int(pop.target[i]))
            merged[key] = merged.get(key, 0.0) + w * pop.mass[i]
    feats = np.array([k[0] for k in merged], dtype=float)
    return DiscretePopulation(feats, [k[1] for k in merged],
                              [k[2] for k in merged], list(merged.values()))


# ---------------------------------------------------------------------------
# Sweep harness


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one benchmark sweep depends on.

    ``noise_mode`` selects how cor_scale / denoise obtain their rates:
    "known" uses the true injection rates, "estimate" runs the anchor-point
    estimator on the corrupted split, "rho_hat_sweep" sweeps the supplied
    ``rho_hat_grid`` of (rho+, rho-) pairs (the estimate-error experiment).
    """

    synthetic: SyntheticConfig = None
    csv_path: str = None
    criterion: Criterion = Criterion.DEMOGRAPHIC_PARITY
    loss: FairnessLoss = None
    rho_plus: float = 0.15
    rho_minus: float = 0.15
    noise_mode: str = "known"
    rho_hat_grid: tuple = ()
    tau_grid: tuple = (0.02, 0.05, 0.1, 0.15, 0.2)
    methods: tuple = METHODS
    repetitions: int = 3
    train_fraction: float = 0.8
    base_seed: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if (self.synthetic is None) == (self.csv_path is None):
            raise ValidationError("exactly one data source must be set")
        if not self.tau_grid or any(t < 0 for t in self.tau_grid):
            raise ValidationError("tau_grid must be nonempty with taus >= 0")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValidationError(f"methods must be a nonempty subset of {METHODS}")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.noise_mode not in ("known", "estimate", "rho_hat_sweep"):
            raise ValidationError("unknown noise_mode")
        if self.noise_mode == "rho_hat_sweep" and not self.rho_hat_grid:
            raise ValidationError("rho_hat_sweep needs a nonempty rho_hat_grid")
        CCNNoise(self.rho_plus, self.rho_minus)
        for rp, rm in self.rho_hat_grid:
            CCNNoise(rp, rm)
        object.__setattr__(self, "tau_grid", tuple(float(t) for t in self.tau_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "rho_hat_grid",
                           tuple((float(p), float(m)) for p, m in self.rho_hat_grid))


@dataclass(frozen=True)
class ResultRow:
    method: str
    tau: float
    tau_prime: float
    rho_plus_hat: float
    rho_minus_hat: float
    split: str
    fairness_violation: float
    error: float
    seed: int
    repetition: int


def default_experiment_config():
    """The shipped benchmark defaults (the privacy-noise regime on the
    default synthetic sample)."""
    return ExperimentConfig(synthetic=default_synthetic_config())


def _load_data(config):
    if config.synthetic is not None:
        return synth_generate(config.synthetic)
    return load_csv(config.csv_path)


def _split(data, config, rep):
    seed = config.base_seed + rep
    order = np.random.default_rng(seed).permutation(len(data))
    n_train = int(config.train_fraction * len(data))
    if n_train == 0 or n_train == len(data):
        raise ValidationError("split leaves an empty train or test set")
    return data.subset(order[:n_train]), data.subset(order[n_train:]), seed


def _inject_seed(config, rep):
    return (config.base_seed + rep) * 1_000_003 + 1


def _rate_pairs(config, corrupted_train):
    """(rho+, rho-) pairs the noise-consuming methods run with."""
    if config.noise_mode == "known":
        return [(config.rho_plus, config.rho_minus)]
    if config.noise_mode == "estimate":
        est = estimate_ccn_rates(corrupted_train, config.estimator)
        return [(est.rho_plus, est.rho_minus)]
    return list(config.rho_hat_grid)


def _evaluate(model, spec, train_clean, test_clean, base, seed, rep):
    rows = []
    for split_name, split_data in (("train", train_clean), ("test", test_clean)):
        rows.append(ResultRow(
            split=split_name,
            fairness_violation=disparity(split_data, model, spec),
            error=accuracy_risk(split_data, model),
            seed=seed, repetition=rep, **base))
    return rows


def run_cell(config, rep, tau):
    """All rows of one (repetition, tau) sweep cell. Deterministic."""
    data = _load_data(config)
    spec = FairnessSpec(config.criterion, config.loss, tau)
    train_clean, test_clean, seed = _split(data, config, rep)
    corrupted = inject_ccn(train_clean, CCNNoise(config.rho_plus, config.rho_minus),
                           _inject_seed(config, rep))
    rows = []

    def record(method, rho_pair, runner):
        base = {"method": method, "tau": tau,
                "tau_prime": None,
                "rho_plus_hat": rho_pair[0] if rho_pair else None,
                "rho_minus_hat": rho_pair[1] if rho_pair else None}
        try:
            model, tau_prime = runner()
            base["tau_prime"] = tau_prime
            rows.extend(_evaluate(model, spec, train_clean, test_clean,
                                  base, seed, rep))
        except FairnoiseError as exc:
            warnings.warn(f"sweep cell {method} tau={tau} rep={rep} failed: {exc}",
                          FairnoiseWarning, stacklevel=2)
            for split_name in ("train", "test"):
                rows.append(ResultRow(split=split_name, fairness_violation=None,
                                      error=None, seed=seed, repetition=rep,
                                      **base))

    for method in config.methods:
        if method == "nocor":
            record(method, None,
                   lambda: (train_fair(train_clean, spec, config.train), None))
        elif method == "cor":
            record(method, None,
                   lambda: (train_fair(corrupted, spec, config.train), None))
        elif method == "cor_scale":
            for pair in _rate_pairs(config, corrupted):
                def scale_runner(pair=pair):
                    model = train_fair_noisy(corrupted, spec, CCNNoise(*pair),
                                             config.train)
                    return model, model.trace.tau
                record(method, pair, scale_runner)
        else:
            for pair in _rate_pairs(config, corrupted):
                def denoise_runner(pair=pair):
                    cleaned, _ = denoise_ccn(corrupted, CCNNoise(*pair),
                                             config.estimator)
                    return train_fair(cleaned, spec, config.train), None
                record(method, pair, denoise_runner)
    return rows


def run_sweep(config, jobs=1):
    """Run every (repetition, tau, method) cell and return the result rows.

    Cells are independent given their derived seeds; ``jobs`` > 1 runs
    them in worker processes. Identical configs yield identical rows.
    """
    tasks = [(rep, tau) for rep in range(config.repetitions)
             for tau in config.tau_grid]
    rows = []
    if jobs <= 1:
        for rep, tau in tasks:
            rows.extend(run_cell(config, rep, tau))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(_run_cell_task,
                                  [(config, rep, tau) for rep, tau in tasks]):
                rows.extend(chunk)
    return rows


def _run_cell_task(args):
    return run_cell(*args)


def _fmt_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sort_key(row):
    return (row.method, row.tau,
            -1.0 if row.rho_plus_hat is None else row.rho_plus_hat,
            -1.0 if row.rho_minus_hat is None else row.rho_minus_hat,
            row.repetition, row.split)


def emit_results(rows, path):
    """Write the results table plus a companion ``*_agg`` file holding
    per-(method, tau, rho_hat, split) means and standard deviations.

    Output is byte-stable: rows are sorted, floats use repr, no
    timestamps.
    """
    rows = sorted(rows, key=_sort_key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt_cell(getattr(row, c)) for c in RESULT_COLUMNS])

    groups = {}
    for row in rows:
        if row.fairness_violation is None:
            continue
        key = (row.method, row.tau, row.rho_plus_hat, row.rho_minus_hat, row.split)
        groups.setdefault(key, []).append(row)
    root, ext = os.path.splitext(path)
    agg_path = root + "_agg" + (ext or ".csv")
    with open(agg_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGG_COLUMNS)
        for key in sorted(groups, key=lambda k: tuple(
                -1.0 if v is None else v if not isinstance(v, str) else v
                for v in k)):
            members = groups[key]
            fv = np.array([r.fairness_violation for r in members])
            er = np.array([r.error for r in members])
            std_fv = float(fv.std(ddof=1)) if len(fv) > 1 else 0.0
            std_er = float(er.std(ddof=1)) if len(er) > 1 else 0.0
            writer.writerow([_fmt_cell(v) for v in key]
                            + [len(members), repr(float(fv.mean())), repr(std_fv),
                               repr(float(er.mean())), repr(std_er)])
    return agg_path


def read_results(path):
    """Parse a results CSV back into ResultRow objects."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULT_COLUMNS:
            raise SchemaError("unexpected results header")
        rows = []
        for rec in reader:
            vals = dict(zip(RESULT_COLUMNS, rec))
            rows.append(ResultRow(
                method=vals["method"], tau=float(vals["tau"]),
                tau_prime=float(vals["tau_prime"]) if vals["tau_prime"] else None,
                rho_plus_hat=(float(vals["rho_plus_hat"])
                              if vals["rho_plus_hat"] else None),
                rho_minus_hat=(float(vals["rho_minus_hat"])
                               if vals["rho_minus_hat"] else None),
                split=vals["split"],
                fairness_violation=(float(vals["fairness_violation"])
                                    if vals["fairness_violation"] else None),
                error=float(vals["error"]) if vals["error"] else None,
                seed=int(vals["seed"]), repetition=int(vals["repetition"])))
    return rows
