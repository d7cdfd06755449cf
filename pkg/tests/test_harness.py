"""Experiment harness tests: presets, trial statistics, the grid, emission."""

import json

import numpy as np
import pytest

import subclust.harness as harness
from subclust import (
    AffinityConfig,
    DatasetFiles,
    ExperimentConfig,
    ExperimentResult,
    PresetTable,
    SyntheticSpec,
    emit_table,
    generate_synthetic,
    parse_experiment_config,
    prepare_dataset,
    run_experiment,
    run_grid,
    save_dataset,
    trial_seed,
)
from subclust.errors import ConfigError
from subclust.harness import AFFINITY_ROWS, GridResult, SOLVER_COLUMNS, summarize_trials

SMALL_SPEC = SyntheticSpec(3, 3, 24, 12, 0.0, seed=4)


def _small_config(**overrides):
    params = dict(
        dataset=SMALL_SPEC,
        solver="lsr",
        affinity="sm",
        n_clusters=3,
        trials=5,
        master_seed=17,
    )
    params.update(overrides)
    return ExperimentConfig(**params)


class TestPresets:
    def test_covers_all_48_cells(self):
        table = PresetTable.builtin()
        assert set(table.datasets()) == {"yaleb", "ar", "usps"}
        count = 0
        for dataset in table.datasets():
            for solver in SOLVER_COLUMNS:
                for affinity in AFFINITY_ROWS:
                    cell = table.cell(dataset, solver, affinity)
                    assert cell["lambda"] > 0
                    count += 1
        assert count == 48

    def test_reported_parameter_values(self):
        table = PresetTable.builtin()
        assert table.cell("yaleb", "lsr", "sm")["lambda"] == 0.01
        assert table.cell("yaleb", "lsr", "ssm")["k_top"] == 5
        assert table.cell("yaleb", "lsr", "ipm")["alpha"] == 6.0
        assert table.cell("yaleb", "smr", "sm")["lambda"] == 2.0**15
        assert table.cell("yaleb", "lrrsc", "sm")["lambda"] == 0.2
        assert table.cell("yaleb", "lrrsc", "ssm")["k_top"] == 7
        assert table.cell("yaleb", "ssc", "sm")["lambda"] == 20.0
        assert table.cell("yaleb", "ssc", "svdm")["alpha"] == 2.0
        assert table.cell("ar", "smr", "sm")["lambda"] == 2.0**20
        assert table.cell("ar", "ssc", "svdm")["alpha"] == 0.125
        assert table.cell("ar", "lrrsc", "sm")["lambda"] == 2.0
        assert table.cell("usps", "smr", "sm")["lambda"] == 2.0**-16
        assert table.cell("usps", "lrrsc", "svdm")["alpha"] == 4.0
        assert table.cell("usps", "ssc", "sm")["lambda"] == 10.0

    def test_pipeline_presets(self):
        table = PresetTable.builtin()
        assert table.pipeline("yaleb") == {"pca_dim": 60, "n_clusters": 10, "normalize": True}
        assert table.pipeline("ar")["pca_dim"] == 120
        assert table.pipeline("usps")["pca_dim"] is None

    def test_config_builders(self):
        table = PresetTable.builtin()
        scfg = table.solver_config("yaleb", "smr")
        assert scfg.lam == 2.0**15 and scfg.k_graph == 4
        acfg = table.affinity_config("yaleb", "lrrsc", "ssm")
        assert acfg.k_top == 7
        assert table.affinity_config("yaleb", "lsr", "sm") == AffinityConfig()

    def test_unknown_dataset(self):
        with pytest.raises(ConfigError):
            PresetTable.builtin().cell("coil20", "lsr", "sm")

    def test_malformed_table_rejected(self):
        with pytest.raises(ConfigError):
            PresetTable({"x": {"pipeline": {}, "solvers": {"lsr": {"lambda": 1.0}}}})


class TestTrialSeeds:
    def test_deterministic_and_distinct(self):
        seeds = [trial_seed(42, i) for i in range(20)]
        assert seeds == [trial_seed(42, i) for i in range(20)]
        assert len(set(seeds)) == 20

    def test_master_seed_matters(self):
        assert trial_seed(1, 0) != trial_seed(2, 0)


class TestRunExperiment:
    def test_structure_and_consistency(self):
        result = run_experiment(_small_config())
        assert len(result.per_trial) == 5
        arr = np.array(result.per_trial)
        assert result.mean == pytest.approx(arr.mean(), abs=1e-9)
        assert result.std == pytest.approx(arr.std(ddof=1), abs=1e-9)
        assert result.max == pytest.approx(arr.max(), abs=1e-9)
        assert result.min == pytest.approx(arr.min(), abs=1e-9)
        assert 0.0 <= result.solver_converged_fraction <= 1.0
        assert result.wall_time_s > 0.0

    def test_deterministic(self):
        a = run_experiment(_small_config())
        b = run_experiment(_small_config())
        assert a.per_trial == b.per_trial
        assert (a.mean, a.std, a.max, a.min) == (b.mean, b.std, b.max, b.min)

    def test_single_trial_zero_std(self):
        result = run_experiment(_small_config(trials=1))
        assert result.std == 0.0
        assert len(result.per_trial) == 1

    def test_resolve_per_trial_matches(self):
        base = run_experiment(_small_config())
        resolved = run_experiment(_small_config(resolve_per_trial=True))
        assert base.per_trial == resolved.per_trial

    def test_file_dataset_source(self, tmp_path):
        ds = generate_synthetic(SMALL_SPEC)
        save_dataset(ds, tmp_path / "m.csv", tmp_path / "l.txt", "csv")
        cfg = _small_config(
            dataset=DatasetFiles(str(tmp_path / "m.csv"), str(tmp_path / "l.txt"))
        )
        from_file = run_experiment(cfg)
        from_spec = run_experiment(_small_config())
        assert from_file.per_trial == from_spec.per_trial


class TestRunGrid:
    def test_sixteen_cells(self):
        ds = prepare_dataset(generate_synthetic(SMALL_SPEC), normalize=True)
        grid = run_grid(ds, trials=3, master_seed=9)
        assert len(grid.cells) == 16
        assert not grid.errors
        assert set(grid.cells) == {
            (s, a) for s in SOLVER_COLUMNS for a in AFFINITY_ROWS
        }

    def test_matches_independent_experiments(self):
        ds = prepare_dataset(generate_synthetic(SMALL_SPEC), normalize=True)
        grid = run_grid(ds, trials=4, master_seed=21)
        for solver in SOLVER_COLUMNS:
            for affinity in AFFINITY_ROWS:
                single = run_experiment(
                    _small_config(solver=solver, affinity=affinity, trials=4, master_seed=21)
                )
                cell = grid.cells[(solver, affinity)]
                assert np.max(np.abs(np.array(cell.per_trial) - np.array(single.per_trial))) <= 1e-12

    def test_solver_failure_contained(self, monkeypatch):
        ds = prepare_dataset(generate_synthetic(SMALL_SPEC), normalize=True)
        real_solve = harness.solve

        def flaky(solver, X, cfg):
            if solver == "smr":
                raise RuntimeError("synthetic failure")
            return real_solve(solver, X, cfg)

        monkeypatch.setattr(harness, "solve", flaky)
        grid = run_grid(ds, trials=2, master_seed=1)
        assert len(grid.cells) == 12
        assert set(grid.errors) == {("smr", a) for a in AFFINITY_ROWS}
        assert "synthetic failure" in grid.errors[("smr", "sm")]

    def test_preset_requires_name(self):
        ds = prepare_dataset(generate_synthetic(SMALL_SPEC), normalize=True)
        with pytest.raises(ConfigError):
            run_grid(ds, PresetTable.builtin(), trials=1)


class TestEmitTable:
    def _grid(self):
        ds = prepare_dataset(generate_synthetic(SMALL_SPEC), normalize=True)
        return run_grid(ds, trials=2, master_seed=3)

    def test_csv_layout(self):
        text = emit_table(self._grid(), "csv")
        lines = text.strip().split("\n")
        assert lines[0] == "method,indicator,LSR,SMR,LRRSC,SSC"
        assert len(lines) == 17  # header + 4 affinities x 4 indicators
        assert lines[1].startswith("SM,Mean,")
        assert lines[5].startswith("SSM,Mean,")
        assert lines[16].startswith("IPM,Min,")
        for line in lines[1:]:
            assert len(line.split(",")) == 6

    def test_console_layout(self):
        text = emit_table(self._grid(), "console")
        lines = text.strip().split("\n")
        assert len(lines) == 17
        assert "LSR" in lines[0] and "SSC" in lines[0]

    def test_error_cell_rendered(self):
        grid = self._grid()
        cells = dict(grid.cells)
        del cells[("smr", "svdm")]
        partial = GridResult(
            cells=cells,
            errors={("smr", "svdm"): "RuntimeError: boom"},
            trials=grid.trials,
            master_seed=grid.master_seed,
        )
        text = emit_table(partial, "csv")
        svdm_mean = [l for l in text.split("\n") if l.startswith("SVDM,Mean")][0]
        assert svdm_mean.split(",")[3] == "ERR"  # SMR column
        assert svdm_mean.split(",")[2] != "ERR"

    def test_deterministic_bytes(self):
        a = emit_table(self._grid(), "csv").encode()
        b = emit_table(self._grid(), "csv").encode()
        assert a == b

    def test_values_printed_to_two_decimals(self):
        text = emit_table(self._grid(), "csv")
        value = text.strip().split("\n")[1].split(",")[2]
        assert len(value.split(".")[1]) == 2

    def test_unknown_format(self):
        with pytest.raises(ConfigError):
            emit_table(self._grid(), "html")


class TestConfigParsing:
    FULL = {
        "dataset": {
            "synthetic": {
                "num_subspaces": 3,
                "subspace_dim": 3,
                "ambient_dim": 24,
                "points_per_subspace": 12,
                "noise_sigma": 0.0,
                "seed": 4,
            }
        },
        "solver": "ssc",
        "solver_config": {"lambda": 15.0, "max_iter": 50},
        "affinity": "ssm",
        "affinity_config": {"k_top": 4},
        "n_clusters": 3,
        "trials": 2,
        "master_seed": 5,
    }

    def test_full_round_trip(self):
        cfg = parse_experiment_config(self.FULL)
        assert cfg.solver == "ssc"
        assert cfg.solver_config.lam == 15.0
        assert cfg.solver_config.max_iter == 50
        assert cfg.solver_config.tol == 2e-4  # untouched ssc default
        assert cfg.affinity_config.k_top == 4
        assert isinstance(cfg.dataset, SyntheticSpec)
        result = run_experiment(cfg)
        assert len(result.per_trial) == 2

    def test_files_dataset(self):
        cfg = parse_experiment_config(
            {
                "dataset": {"matrix_path": "m.csv", "labels_path": "l.txt"},
                "solver": "lsr",
                "affinity": "sm",
                "n_clusters": 2,
            }
        )
        assert isinstance(cfg.dataset, DatasetFiles)
        assert cfg.dataset.format == "csv"

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update({"lamda": 3}),
            lambda d: d["solver_config"].update({"lambda_e": 3}),
            lambda d: d["affinity_config"].update({"ktop": 3}),
            lambda d: d["dataset"]["synthetic"].update({"subspaces": 3}),
        ],
    )
    def test_unknown_keys_rejected(self, mutate):
        blob = json.loads(json.dumps(self.FULL))
        mutate(blob)
        with pytest.raises(ConfigError, match="unknown key"):
            parse_experiment_config(blob)

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="required"):
            parse_experiment_config({"solver": "lsr", "affinity": "sm", "n_clusters": 2})

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(self.FULL))
        from subclust import load_experiment_config

        assert load_experiment_config(path).solver == "ssc"
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_experiment_config(bad)


class TestResultValidation:
    def test_summarize(self):
        result = summarize_trials([50.0, 60.0, 70.0], 1.0, 1.0)
        assert result.mean == 60.0
        assert result.min == 50.0 and result.max == 70.0
        assert result.std == pytest.approx(10.0)

    def test_inconsistent_stats_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentResult(
                mean=10.0, std=1.0, max=5.0, min=0.0, per_trial=(5.0,),
                wall_time_s=0.1, solver_converged_fraction=1.0,
            )

    def test_experiment_config_validation(self):
        with pytest.raises(ConfigError):
            _small_config(trials=0)
        with pytest.raises(ConfigError):
            _small_config(solver="pca")
        with pytest.raises(ConfigError):
            _small_config(laplacian="mesh")
