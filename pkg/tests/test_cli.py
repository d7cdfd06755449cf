"""End-to-end CLI tests driven through main() with explicit argv."""

import json

import numpy as np
import pytest

from subclust.cli import main
from subclust.data import load_dataset, load_matrix_binary


def _write_synth(tmp_path, prefix="data", fmt="csv", seed=3):
    out = tmp_path / prefix
    code = main(
        [
            "synth", "--subspaces", "3", "--dim", "3", "--ambient", "24",
            "--points", "12", "--noise", "0.0", "--seed", str(seed),
            "--out", str(out), "--format", fmt,
        ]
    )
    assert code == 0
    suffix = "csv" if fmt == "csv" else "bin"
    return f"{out}.{suffix}", f"{out}.labels"


class TestSynth:
    def test_writes_loadable_files(self, tmp_path):
        matrix, labels = _write_synth(tmp_path)
        ds = load_dataset(matrix, labels, "csv")
        assert ds.matrix.values.shape == (24, 36)
        assert ds.truth.k == 3

    def test_binary_format(self, tmp_path):
        matrix, labels = _write_synth(tmp_path, fmt="binary")
        assert load_matrix_binary(matrix).shape == (24, 36)

    def test_deterministic(self, tmp_path):
        m1, _ = _write_synth(tmp_path, "a", seed=9)
        m2, _ = _write_synth(tmp_path, "b", seed=9)
        assert open(m1).read() == open(m2).read()

    def test_infeasible_spec_exits_one(self, tmp_path, capsys):
        code = main(
            [
                "synth", "--subspaces", "5", "--dim", "10", "--ambient", "12",
                "--points", "12", "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 1
        assert "config error" in capsys.readouterr().err


class TestRun:
    def _config(self, tmp_path, **extra):
        cfg = {
            "dataset": {
                "synthetic": {
                    "num_subspaces": 3, "subspace_dim": 3, "ambient_dim": 24,
                    "points_per_subspace": 12, "noise_sigma": 0.0, "seed": 4,
                }
            },
            "solver": "lsr",
            "affinity": "sm",
            "n_clusters": 3,
            "trials": 3,
            "master_seed": 2,
        }
        cfg.update(extra)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_run_prints_summary(self, tmp_path, capsys):
        code = main(["run", "--config", str(self._config(tmp_path))])
        assert code == 0
        out = capsys.readouterr().out
        assert "lsr+sm" in out and "mean=" in out

    def test_out_csv(self, tmp_path):
        out = tmp_path / "trials.csv"
        code = main(["run", "--config", str(self._config(tmp_path)), "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "trial,accuracy_percent"
        assert len(lines) == 4

    def test_dump_matrices(self, tmp_path):
        coeff = tmp_path / "c.bin"
        aff = tmp_path / "w.bin"
        code = main(
            [
                "run", "--config", str(self._config(tmp_path)),
                "--dump-coeff", str(coeff), "--dump-affinity", str(aff),
            ]
        )
        assert code == 0
        C = load_matrix_binary(coeff)
        W = load_matrix_binary(aff)
        assert C.shape == (36, 36) and W.shape == (36, 36)
        assert np.max(np.abs(W - W.T)) == 0.0

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        path = self._config(tmp_path, typo_key=1)
        assert main(["run", "--config", str(path)]) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_missing_dataset_file_exits_two(self, tmp_path):
        cfg = {
            "dataset": {"matrix_path": str(tmp_path / "nope.csv"), "labels_path": str(tmp_path / "no.txt")},
            "solver": "lsr", "affinity": "sm", "n_clusters": 2,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 2


class TestGrid:
    def test_grid_csv(self, tmp_path, capsys):
        matrix, labels = _write_synth(tmp_path)
        out = tmp_path / "grid.csv"
        code = main(
            [
                "grid", "--dataset", matrix, "--labels", labels,
                "--trials", "2", "--seed", "5", "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "method,indicator,LSR,SMR,LRRSC,SSC"
        assert len(lines) == 17
        assert "Method" in capsys.readouterr().out

    def test_grid_byte_identical_across_runs(self, tmp_path):
        matrix, labels = _write_synth(tmp_path)
        outs = []
        for name in ("g1.csv", "g2.csv"):
            out = tmp_path / name
            assert main(
                [
                    "grid", "--dataset", matrix, "--labels", labels,
                    "--trials", "2", "--seed", "5", "--out", str(out),
                ]
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_files_exit_two(self, tmp_path):
        assert main(
            ["grid", "--dataset", str(tmp_path / "a.csv"), "--labels", str(tmp_path / "b.txt")]
        ) == 2

    def test_bad_flag_exits_one(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            main(["grid", "--dataset", "x", "--labels", "y", "--preset", "coil"])
        assert err.value.code == 1
        capsys.readouterr()

    def test_pca_applied(self, tmp_path):
        matrix, labels = _write_synth(tmp_path)
        out = tmp_path / "grid.csv"
        code = main(
            [
                "grid", "--dataset", matrix, "--labels", labels,
                "--pca", "9", "--trials", "1", "--seed", "0", "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()


class TestExitCodes:
    def test_numerical_failure_exits_three(self, tmp_path, monkeypatch, capsys):
        import subclust.cli as cli
        from subclust.errors import NumericalError

        def boom(cfg):
            raise NumericalError("eigensolver went sideways")

        monkeypatch.setattr(cli, "run_experiment", boom)
        cfg = {
            "dataset": {
                "synthetic": {
                    "num_subspaces": 2, "subspace_dim": 2, "ambient_dim": 8,
                    "points_per_subspace": 6, "noise_sigma": 0.0, "seed": 0,
                }
            },
            "solver": "lsr", "affinity": "sm", "n_clusters": 2, "trials": 1,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_dump_labels_and_resolve_flag(self, tmp_path):
        matrix, labels = _write_synth(tmp_path)
        cfg = {
            "dataset": {"matrix_path": matrix, "labels_path": labels},
            "solver": "lsr", "affinity": "sm", "n_clusters": 3, "trials": 2,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out_labels = tmp_path / "pred.labels"
        code = main(
            ["run", "--config", str(path), "--dump-labels", str(out_labels),
             "--resolve-per-trial"]
        )
        assert code == 0
        pred = np.loadtxt(out_labels, dtype=int)
        assert pred.shape == (36,)
        assert set(pred.tolist()) <= {0, 1, 2}
