"""Benchmark harness tests: data IO, synthetic generation, oracles and the
sweep protocol."""

import warnings
from dataclasses import replace

import numpy as np
import pytest

from fairnoise._logit import fit_logistic
from fairnoise.bench import (ExperimentConfig, ResultRow, SyntheticConfig,
                             default_experiment_config,
                             disparity_synthetic_config, emit_results,
                             load_csv, materialize, mix_populations,
                             population_oracle, read_results, run_cell,
                             run_sweep, synth_generate, write_csv,
                             _inject_seed, _split)
from fairnoise.core import (ConstantScorer, Criterion, Dataset,
                            DiscretePopulation, FairnessSpec, LinearScorer,
                            accuracy_risk, ddp)
from fairnoise.errors import (EmptyDataset, FairnoiseWarning, ParseError,
                              SchemaError, ValidationError)
from fairnoise.fairtrain import TrainConfig, train_fair
from fairnoise.noise import CCNNoise, ccn_to_mc_from_corrupted, inject_ccn

FAST_TRAIN = TrainConfig(outer_iterations=8, base_iterations=25,
                         presolve_iterations=12, presolve_base_iterations=40)


def small_config(**kw):
    base = dict(
        synthetic=disparity_synthetic_config(n=700, seed=4),
        tau_grid=(0.05, 0.2), methods=("nocor", "cor"), repetitions=2,
        base_seed=3, train=FAST_TRAIN)
    base.update(kw)
    return ExperimentConfig(**base)


class TestLoadCsv:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,x1,sensitive,label\n1.0,2.0,0,1\n3.5,-1.0,1,0\n0.0,0.25,1,1\n")
        data = load_csv(p)
        assert len(data) == 3 and data.dimension == 2
        assert list(data.sensitive) == [0, 1, 1]
        assert list(data.target) == [1, 0, 1]
        assert data.features[1, 0] == 3.5

    def test_sensitive_out_of_range(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,sensitive,label\n1.0,2,0\n")
        with pytest.raises(SchemaError):
            load_csv(p)

    def test_missing_cell_location(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,x1,sensitive,label\n1.0,2.0,0,1\n1.0,,0,1\n")
        with pytest.raises(ParseError) as err:
            load_csv(p)
        assert err.value.row == 3 and err.value.column == "x1"

    def test_drop_missing(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,sensitive,label\n1.0,0,1\n,0,1\n2.0,1,0\n")
        data = load_csv(p, drop_missing=True)
        assert len(data) == 2

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,sensitive,label\nfoo,0,1\n")
        with pytest.raises(ParseError) as err:
            load_csv(p)
        assert err.value.column == "x0"

    def test_missing_required_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,label\n1.0,1\n")
        with pytest.raises(SchemaError):
            load_csv(p)

    def test_header_only_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,sensitive,label\n")
        with pytest.raises(EmptyDataset):
            load_csv(p)

    def test_write_then_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        data = synth_generate(disparity_synthetic_config(n=60, seed=1))
        p = tmp_path / "d.csv"
        write_csv(data, p)
        back = load_csv(p)
        assert np.array_equal(back.features, data.features)
        assert np.array_equal(back.sensitive, data.sensitive)
        assert np.array_equal(back.target, data.target)


class TestSynthGenerate:
    def test_degenerate_proportions(self):
        cfg = SyntheticConfig(means=((0.0,), (1.0,), (2.0,), (3.0,)),
                              proportions=(1.0, 0.0, 0.0, 0.0),
                              variance=1.0, n=50, seed=2)
        data = synth_generate(cfg)
        assert (data.sensitive == 0).all() and (data.target == 0).all()

    def test_cell_fractions_concentrate(self):
        cfg = SyntheticConfig(means=((0.0,),) * 4,
                              proportions=(0.25, 0.25, 0.25, 0.25),
                              variance=1.0, n=100_000, seed=3)
        data = synth_generate(cfg)
        for a in (0, 1):
            for y in (0, 1):
                frac = ((data.sensitive == a) & (data.target == y)).mean()
                assert abs(frac - 0.25) <= 0.01

    def test_separated_means_are_learnable(self):
        # class means 4 sigma apart on the target axis
        cfg = SyntheticConfig(means=((-2.0, 0.0), (2.0, 0.0),
                                     (-2.0, 1.0), (2.0, 1.0)),
                              proportions=(0.3, 0.3, 0.2, 0.2),
                              variance=1.0, n=4000, seed=4)
        data = synth_generate(cfg)
        train, test = data.subset(np.arange(3000)), data.subset(np.arange(3000, 4000))
        coef, b, _, _ = fit_logistic(train.features, train.target.astype(float),
                                     np.full(3000, 1 / 3000), max_iter=2000)
        assert accuracy_risk(test, LinearScorer(coef, b)) <= 0.05

    def test_deterministic(self):
        cfg = disparity_synthetic_config(n=100, seed=5)
        assert np.array_equal(synth_generate(cfg).features,
                              synth_generate(cfg).features)

    def test_default_synthetic_has_active_disparity(self):
        # the shipped sample is calibrated so the unconstrained fit's DDP
        # lands inside [0.3, 0.5]
        data = synth_generate(disparity_synthetic_config())
        n = len(data)
        coef, b, _, _ = fit_logistic(data.features, data.target.astype(float),
                                     np.full(n, 1.0 / n), reg=3e-3, max_iter=2000)
        assert 0.3 <= ddp(data, LinearScorer(coef, b)) <= 0.5

    def test_validation(self):
        with pytest.raises(ValidationError):
            SyntheticConfig(means=((0.0,),) * 4, proportions=(0.5, 0.5, 0.2, -0.2),
                            variance=1.0, n=10, seed=0)
        with pytest.raises(ValidationError):
            SyntheticConfig(means=((0.0,),) * 3, proportions=(0.25,) * 4,
                            variance=1.0, n=10, seed=0)


class TestOracles:
    def test_uniform_population_constant_scorer(self):
        pop = DiscretePopulation(np.zeros((4, 1)), [0, 0, 1, 1], [0, 1, 0, 1],
                                 [0.25] * 4)
        d, e, r = population_oracle(pop, ConstantScorer(1.0))
        assert d == 0.0 and e == 0.0
        assert r == pytest.approx(0.5, abs=1e-15)

    def test_two_cell_hand_computed(self):
        pop = DiscretePopulation(np.array([[1.0], [-1.0]]), [0, 1], [1, 1],
                                 [0.3, 0.7])
        d, e, r = population_oracle(pop, LinearScorer([1.0]))
        assert d == pytest.approx(1.0, abs=1e-15)  # groups predict 1 vs 0
        assert e == pytest.approx(1.0, abs=1e-15)
        assert r == pytest.approx(0.7, abs=1e-15)

    def test_materialize_requires_integer_counts(self):
        pop = DiscretePopulation(np.zeros((2, 1)), [0, 1], [0, 1],
                                 [1 / 3, 2 / 3])
        with pytest.raises(ValidationError):
            materialize(pop, 1000)
        data = materialize(pop, 9)
        assert len(data) == 9 and (data.sensitive == 1).sum() == 6

    def test_mix_populations_weights(self):
        a = DiscretePopulation(np.array([[0.0]]), [0], [0], [1.0])
        b = DiscretePopulation(np.array([[1.0]]), [1], [1], [1.0])
        mixed = mix_populations(a, b, 0.25)
        cells = {(tuple(mixed.features[i]), int(mixed.sensitive[i])):
                 mixed.mass[i] for i in range(mixed.n_cells)}
        assert cells[((0.0,), 0)] == pytest.approx(0.25, abs=1e-15)
        assert cells[((1.0,), 1)] == pytest.approx(0.75, abs=1e-15)


class TestRunSweep:
    def test_structural_row_count(self):
        cfg = small_config(methods=("nocor",), tau_grid=(0.02, 0.1, 0.2),
                           repetitions=2)
        rows = run_sweep(cfg)
        assert len(rows) == 3 * 2 * 2  # taus x reps x splits
        assert {r.split for r in rows} == {"train", "test"}
        assert all(0.0 <= r.fairness_violation <= 1.0 and 0.0 <= r.error <= 1.0
                   for r in rows)

    def test_zero_noise_cor_equals_nocor(self):
        cfg = small_config(rho_plus=0.0, rho_minus=0.0)
        rows = run_sweep(cfg)
        key = lambda r: (r.tau, r.repetition, r.split)
        nocor = {key(r): r for r in rows if r.method == "nocor"}
        cor = {key(r): r for r in rows if r.method == "cor"}
        assert set(nocor) == set(cor)
        for k in nocor:
            assert nocor[k].fairness_violation == cor[k].fairness_violation
            assert nocor[k].error == cor[k].error

    def test_tau_prime_formula(self):
        cfg = small_config(methods=("cor_scale",), tau_grid=(0.1,))
        rows = run_sweep(cfg)
        data = synth_generate(cfg.synthetic)
        for row in rows:
            train, _, _ = _split(data, cfg, row.repetition)
            corrupted = inject_ccn(train, CCNNoise(cfg.rho_plus, cfg.rho_minus),
                                   _inject_seed(cfg, row.repetition))
            mc, _ = ccn_to_mc_from_corrupted(
                CCNNoise(row.rho_plus_hat, row.rho_minus_hat),
                corrupted.base_rate())
            assert row.tau_prime == pytest.approx(
                row.tau * (1.0 - mc.alpha - mc.beta), abs=1e-12)

    def test_violation_measured_on_clean_attributes(self):
        # at a vacuous tau the cor model is the unconstrained fit on the
        # corrupted split; its recorded violation must equal the clean-
        # attribute ddp, which we recompute independently
        cfg = small_config(methods=("cor",), tau_grid=(1.0,), repetitions=1)
        rows = run_sweep(cfg)
        data = synth_generate(cfg.synthetic)
        train, test, _ = _split(data, cfg, 0)
        corrupted = inject_ccn(train, CCNNoise(cfg.rho_plus, cfg.rho_minus),
                               _inject_seed(cfg, 0))
        spec = FairnessSpec(cfg.criterion, cfg.loss, 1.0)
        model = train_fair(corrupted, spec, cfg.train)
        want = {"train": ddp(train, model), "test": ddp(test, model)}
        for row in rows:
            assert row.fairness_violation == pytest.approx(want[row.split],
                                                           abs=1e-15)

    def test_failed_cell_recorded_not_raised(self, tmp_path):
        # EO training needs positives in both groups; this dataset has no
        # (A=1, Y=1) examples at all, so every cell fails
        rng = np.random.default_rng(1)
        n = 40
        a = np.array([0, 1] * (n // 2))
        y = np.where(a == 1, 0, rng.integers(0, 2, n))
        p = tmp_path / "d.csv"
        write_csv(Dataset(rng.normal(0, 1, (n, 2)), a, y), p)
        cfg = ExperimentConfig(csv_path=str(p), criterion=Criterion.EQUAL_OPPORTUNITY,
                               methods=("nocor",), tau_grid=(0.1,),
                               repetitions=1, rho_plus=0.0, rho_minus=0.0,
                               train=FAST_TRAIN, base_seed=1)
        with pytest.warns(FairnoiseWarning):
            rows = run_sweep(cfg)
        assert len(rows) == 2
        assert all(r.fairness_violation is None and r.error is None for r in rows)

    def test_rho_hat_sweep_mode(self):
        cfg = small_config(methods=("cor_scale",), tau_grid=(0.2,),
                           repetitions=1, noise_mode="rho_hat_sweep",
                           rho_hat_grid=((0.0, 0.1), (0.0, 0.3)),
                           rho_plus=0.0, rho_minus=0.2)
        rows = run_sweep(cfg)
        assert len(rows) == 4  # two rho-hats x two splits
        assert {r.rho_minus_hat for r in rows} == {0.1, 0.3}

    def test_estimate_mode_records_estimates(self):
        cfg = small_config(
            synthetic=disparity_synthetic_config(n=2500, seed=8),
            methods=("cor_scale",), tau_grid=(0.2,), repetitions=1,
            noise_mode="estimate")
        rows = run_sweep(cfg)
        assert all(r.rho_plus_hat is not None and r.rho_minus_hat is not None
                   for r in rows)
        assert all(0.0 <= r.rho_minus_hat < 1.0 for r in rows)

    def test_parallel_jobs_match_sequential(self):
        cfg = small_config(tau_grid=(0.1,), repetitions=2)
        seq = run_sweep(cfg, jobs=1)
        par = run_sweep(cfg, jobs=2)
        key = lambda r: (r.method, r.tau, r.repetition, r.split)
        assert sorted(seq, key=key) == sorted(par, key=key)


class TestEmitResults:
    def test_schema_and_round_trip(self, tmp_path):
        cfg = small_config(tau_grid=(0.1,), repetitions=1)
        rows = run_sweep(cfg)
        out = tmp_path / "results.csv"
        agg = emit_results(rows, out)
        header = out.read_text().splitlines()[0]
        assert header == ("method,tau,tau_prime,rho_plus_hat,rho_minus_hat,"
                          "split,fairness_violation,error,seed,repetition")
        back = read_results(out)
        assert sorted(back, key=str) == sorted(rows, key=str)
        assert agg.endswith("_agg.csv")

    def test_empty_rows_header_only(self, tmp_path):
        out = tmp_path / "results.csv"
        emit_results([], out)
        lines = out.read_text().splitlines()
        assert len(lines) == 1

    def test_aggregation_mean(self, tmp_path):
        rows = [ResultRow("nocor", 0.1, None, None, None, "test", v, e, 3, i)
                for i, (v, e) in enumerate([(0.1, 0.2), (0.2, 0.3), (0.3, 0.4)])]
        out = tmp_path / "r.csv"
        agg_path = emit_results(rows, out)
        line = open(agg_path).read().splitlines()[1].split(",")
        assert float(line[6]) == pytest.approx(0.2, abs=1e-12)   # mean violation
        assert float(line[8]) == pytest.approx(0.3, abs=1e-12)   # mean error

    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_config(tau_grid=(0.05,), repetitions=1)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_results(run_sweep(cfg), a)
        emit_results(run_sweep(cfg), b)
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a_agg.csv").read_bytes() == \
            (tmp_path / "b_agg.csv").read_bytes()


class TestDefaultConfig:
    def test_shipped_file_matches_code_default(self):
        from importlib import resources
        from fairnoise.sweepconfig import build_experiment_config, parse_config_file
        with resources.as_file(resources.files("fairnoise") /
                               "default_sweep.cfg") as p:
            cfg = build_experiment_config(parse_config_file(p))
        assert cfg == default_experiment_config()

    def test_config_file_round_trip(self, tmp_path):
        from fairnoise.sweepconfig import (build_experiment_config,
                                           config_to_mapping, parse_config_file,
                                           write_config_file)
        cfg = small_config(noise_mode="rho_hat_sweep",
                           rho_hat_grid=((0.0, 0.1), (0.05, 0.2)))
        p = tmp_path / "sweep.cfg"
        write_config_file(cfg, p)
        assert build_experiment_config(parse_config_file(p)) == cfg

    def test_unknown_key_rejected(self, tmp_path):
        from fairnoise.sweepconfig import parse_config_file
        p = tmp_path / "bad.cfg"
        p.write_text("nonsense = 1\n")
        with pytest.raises(ValidationError):
            parse_config_file(p)


class TestCsvDataSource:
    def test_sweep_runs_from_csv_config(self, tmp_path):
        data = synth_generate(disparity_synthetic_config(n=500, seed=19))
        p = tmp_path / "src.csv"
        write_csv(data, p)
        from fairnoise.sweepconfig import build_experiment_config
        cfg = build_experiment_config({
            "data": "csv", "csv_path": str(p), "tau_grid": "0.1",
            "methods": "nocor,cor_scale", "repetitions": "1",
            "outer_iterations": "6", "base_iterations": "20",
            "presolve_iterations": "8", "presolve_base_iterations": "30"})
        assert cfg.csv_path == str(p) and cfg.synthetic is None
        rows = run_sweep(cfg)
        assert len(rows) == 4
        assert all(r.fairness_violation is not None for r in rows)
