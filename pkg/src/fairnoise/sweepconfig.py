"""Flat key-value config files for the sweep harness.

One ``key = value`` pair per line, ``#`` lines are comments. Keys mirror
the experiment fields; CLI flags override file values, file values
override the shipped defaults. Unknown keys are errors.
"""

from .bench import (ExperimentConfig, SyntheticConfig, default_experiment_config)
from .core import Criterion, FairnessLoss
from .errors import ValidationError
from .estimation import EstimatorConfig
from .fairtrain import TrainConfig

_CRITERIA = {"dp": Criterion.DEMOGRAPHIC_PARITY, "eo": Criterion.EQUAL_OPPORTUNITY}
_LOSSES = {"default": None,
           "predict_nonpositive": FairnessLoss.PREDICT_NONPOSITIVE,
           "zero_one": FairnessLoss.ZERO_ONE}
_MEAN_KEYS = ("synth_mean_a0y0", "synth_mean_a0y1",
              "synth_mean_a1y0", "synth_mean_a1y1")

KNOWN_KEYS = {
    "data", "csv_path", "criterion", "loss", "rho_plus", "rho_minus",
    "noise_mode", "rho_hat_grid", "tau_grid", "methods", "repetitions",
    "train_fraction", "base_seed",
    "synth_n", "synth_seed", "synth_variance", "synth_proportions", *_MEAN_KEYS,
    "outer_iterations", "base_iterations", "dual_step", "dual_bound",
    "base_step", "regularization", "train_seed", "select_best",
    "feasibility_slack", "boundary_margin", "presolve_iterations",
    "presolve_base_iterations",
    "est_max_iter", "est_n_bins", "est_anchor_quantile",
}


def parse_config_file(path):
    """Read a flat key-value file into a string mapping."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in KNOWN_KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            mapping[key] = value.strip()
    return mapping


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def _bool(text):
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def build_experiment_config(mapping):
    """ExperimentConfig from a merged string mapping; unset keys keep the
    shipped defaults."""
    base = default_experiment_config()
    m = dict(mapping)

    def pop(key, default):
        return m.pop(key, default)

    data_kind = pop("data", "synthetic" if base.csv_path is None else "csv")
    synth = base.synthetic
    csv_path = None
    if data_kind == "csv":
        csv_path = pop("csv_path", base.csv_path)
        if not csv_path:
            raise ValidationError("data = csv needs csv_path")
        synth = None
    elif data_kind != "synthetic":
        raise ValidationError("data must be 'synthetic' or 'csv'")
    if synth is not None:
        means = tuple(
            _floats(pop(k, ",".join(repr(x) for x in synth.means[i])))
            for i, k in enumerate(_MEAN_KEYS))
        synth = SyntheticConfig(
            means=means,
            proportions=_floats(pop("synth_proportions",
                                    ",".join(repr(x) for x in synth.proportions))),
            variance=float(pop("synth_variance", synth.variance)),
            n=int(pop("synth_n", synth.n)),
            seed=int(pop("synth_seed", synth.seed)))
    else:
        for k in (*_MEAN_KEYS, "synth_proportions", "synth_variance",
                  "synth_n", "synth_seed"):
            m.pop(k, None)

    criterion = pop("criterion", None)
    if criterion is not None:
        if criterion not in _CRITERIA:
            raise ValidationError(f"criterion must be one of {sorted(_CRITERIA)}")
        criterion = _CRITERIA[criterion]
    else:
        criterion = base.criterion
    loss = pop("loss", None)
    if loss is not None:
        if loss not in _LOSSES:
            raise ValidationError(f"loss must be one of {sorted(_LOSSES)}")
        loss = _LOSSES[loss]
    else:
        loss = base.loss

    grid_text = pop("rho_hat_grid", None)
    if grid_text is None:
        rho_hat_grid = base.rho_hat_grid
    else:
        rho_hat_grid = []
        for pair in grid_text.split(","):
            pair = pair.strip()
            if not pair:
                continue
            if ":" not in pair:
                raise ValidationError("rho_hat_grid entries look like rho+:rho-")
            p, _, q = pair.partition(":")
            rho_hat_grid.append((float(p), float(q)))
        rho_hat_grid = tuple(rho_hat_grid)

    train = TrainConfig(
        dual_step=float(pop("dual_step", base.train.dual_step)),
        dual_bound=float(pop("dual_bound", base.train.dual_bound)),
        outer_iterations=int(pop("outer_iterations", base.train.outer_iterations)),
        base_iterations=int(pop("base_iterations", base.train.base_iterations)),
        base_step=float(pop("base_step", base.train.base_step)),
        regularization=float(pop("regularization", base.train.regularization)),
        seed=int(pop("train_seed", base.train.seed)),
        select_best=(_bool(pop("select_best", "x")) if "select_best" in mapping
                     else base.train.select_best),
        feasibility_slack=float(pop("feasibility_slack",
                                    base.train.feasibility_slack)),
        boundary_margin=float(pop("boundary_margin", base.train.boundary_margin)),
        presolve_iterations=int(pop("presolve_iterations",
                                    base.train.presolve_iterations)),
        presolve_base_iterations=int(pop("presolve_base_iterations",
                                         base.train.presolve_base_iterations)))
    estimator = EstimatorConfig(
        max_iter=int(pop("est_max_iter", base.estimator.max_iter)),
        n_bins=int(pop("est_n_bins", base.estimator.n_bins)),
        anchor_quantile=float(pop("est_anchor_quantile",
                                  base.estimator.anchor_quantile)))

    config = ExperimentConfig(
        synthetic=synth, csv_path=csv_path, criterion=criterion, loss=loss,
        rho_plus=float(pop("rho_plus", base.rho_plus)),
        rho_minus=float(pop("rho_minus", base.rho_minus)),
        noise_mode=pop("noise_mode", base.noise_mode),
        rho_hat_grid=rho_hat_grid,
        tau_grid=_floats(pop("tau_grid", ",".join(repr(t) for t in base.tau_grid))),
        methods=tuple(s.strip() for s in pop("methods",
                                             ",".join(base.methods)).split(",")
                      if s.strip()),
        repetitions=int(pop("repetitions", base.repetitions)),
        train_fraction=float(pop("train_fraction", base.train_fraction)),
        base_seed=int(pop("base_seed", base.base_seed)),
        train=train, estimator=estimator)
    m.pop("select_best", None)
    if m:
        raise ValidationError(f"unused config keys: {sorted(m)}")
    return config


def config_to_mapping(config):
    """Flat mapping reproducing an ExperimentConfig (used to ship the
    default config file)."""
    out = {}
    if config.csv_path is not None:
        out["data"] = "csv"
        out["csv_path"] = config.csv_path
    else:
        out["data"] = "synthetic"
        s = config.synthetic
        for key, mean in zip(_MEAN_KEYS, s.means):
            out[key] = ",".join(repr(v) for v in mean)
        out["synth_proportions"] = ",".join(repr(v) for v in s.proportions)
        out["synth_variance"] = repr(s.variance)
        out["synth_n"] = str(s.n)
        out["synth_seed"] = str(s.seed)
    out["criterion"] = config.criterion.value
    out["loss"] = "default" if config.loss is None else config.loss.value
    out["rho_plus"] = repr(config.rho_plus)
    out["rho_minus"] = repr(config.rho_minus)
    out["noise_mode"] = config.noise_mode
    if config.rho_hat_grid:
        out["rho_hat_grid"] = ",".join(f"{repr(p)}:{repr(q)}"
                                       for p, q in config.rho_hat_grid)
    out["tau_grid"] = ",".join(repr(t) for t in config.tau_grid)
    out["methods"] = ",".join(config.methods)
    out["repetitions"] = str(config.repetitions)
    out["train_fraction"] = repr(config.train_fraction)
    out["base_seed"] = str(config.base_seed)
    t = config.train
    out.update(dual_step=repr(t.dual_step), dual_bound=repr(t.dual_bound),
               outer_iterations=str(t.outer_iterations),
               base_iterations=str(t.base_iterations),
               base_step=repr(t.base_step), regularization=repr(t.regularization),
               train_seed=str(t.seed),
               select_best="true" if t.select_best else "false",
               feasibility_slack=repr(t.feasibility_slack),
               boundary_margin=repr(t.boundary_margin),
               presolve_iterations=str(t.presolve_iterations),
               presolve_base_iterations=str(t.presolve_base_iterations))
    e = config.estimator
    out.update(est_max_iter=str(e.max_iter), est_n_bins=str(e.n_bins),
               est_anchor_quantile=repr(e.anchor_quantile))
    return out


def write_config_file(config, path):
    mapping = config_to_mapping(config)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# fairnoise sweep configuration\n")
        for key, value in mapping.items():
            fh.write(f"{key} = {value}\n")
