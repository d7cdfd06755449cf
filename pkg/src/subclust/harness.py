"""Experiment configuration, the solver x affinity grid, and table emission.

A single experiment solves the coefficient matrix once, builds one affinity,
and repeats spectral clustering over seeded trials; the grid runs all sixteen
solver/affinity combinations, reusing each solver's coefficient matrix across
its four affinities. Trial seeds derive from the master seed, so every number
is exactly reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .affinity import AFFINITIES, AffinityConfig, build_affinity
from .data import Dataset, SyntheticSpec, generate_synthetic, load_dataset, prepare_dataset
from .errors import ConfigError
from .solvers import SOLVERS, SolverConfig, default_solver_config, solve
from .spectral import LAPLACIANS, SpectralConfig, clustering_accuracy, kmeans, spectral_embed

SOLVER_COLUMNS = ("lsr", "smr", "lrrsc", "ssc")  # report column order
AFFINITY_ROWS = ("sm", "ssm", "svdm", "ipm")
INDICATORS = ("Mean", "STD", "Max", "Min")


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Stable per-trial seed derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1)[0])


@dataclass(frozen=True)
class DatasetFiles:
    """A matrix file plus a labels file on disk."""

    matrix_path: str
    labels_path: str
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one solver/affinity experiment."""

    dataset: DatasetFiles | SyntheticSpec
    solver: str
    affinity: str
    n_clusters: int
    solver_config: SolverConfig | None = None  # None -> per-solver defaults
    affinity_config: AffinityConfig = AffinityConfig()
    pca_dim: int | None = None
    normalize: bool = True
    trials: int = 20
    master_seed: int = 0
    resolve_per_trial: bool = False
    kmeans_restarts: int = 10
    laplacian: str = "symmetric_normalized"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.affinity not in AFFINITIES:
            raise ConfigError(f"unknown affinity {self.affinity!r}")
        if self.n_clusters < 2:
            raise ConfigError("n_clusters must be >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.laplacian not in LAPLACIANS:
            raise ConfigError(f"laplacian must be one of {LAPLACIANS}")


@dataclass(frozen=True)
class ExperimentResult:
    """Trial statistics of one experiment (accuracies in percent)."""

    mean: float
    std: float
    max: float
    min: float
    per_trial: tuple[float, ...]
    wall_time_s: float
    solver_converged_fraction: float

    def __post_init__(self):
        if not (self.min <= self.mean <= self.max):
            raise ConfigError("inconsistent statistics: min <= mean <= max violated")
        if self.std < 0:
            raise ConfigError("standard deviation cannot be negative")


def summarize_trials(
    accuracies, wall_time_s: float, solver_converged_fraction: float
) -> ExperimentResult:
    """Aggregate per-trial accuracies with the sample (n-1) std convention."""
    acc = np.asarray(list(accuracies), dtype=np.float64)
    std = float(np.std(acc, ddof=1)) if acc.size > 1 else 0.0
    return ExperimentResult(
        mean=float(np.mean(acc)),
        std=std,
        max=float(np.max(acc)),
        min=float(np.min(acc)),
        per_trial=tuple(float(a) for a in acc),
        wall_time_s=wall_time_s,
        solver_converged_fraction=solver_converged_fraction,
    )


class PresetTable:
    """Per-(dataset, solver, affinity) parameter presets for reproduction runs."""

    def __init__(self, table: dict):
        for name, block in table.items():
            if set(block) != {"pipeline", "solvers"}:
                raise ConfigError(f"preset block {name!r} must have pipeline and solvers")
            for solver in SOLVER_COLUMNS:
                cell = block["solvers"].get(solver)
                if cell is None or set(cell) != {"lambda", "ssm_k", "svdm_alpha", "ipm_alpha"}:
                    raise ConfigError(
                        f"preset {name!r}/{solver!r} needs lambda, ssm_k, svdm_alpha, ipm_alpha"
                    )
        self.table = table

    @classmethod
    def builtin(cls) -> "PresetTable":
        text = resources.files("subclust").joinpath("presets.json").read_text()
        return cls(json.loads(text))

    def datasets(self) -> tuple[str, ...]:
        return tuple(self.table)

    def _block(self, dataset: str) -> dict:
        if dataset not in self.table:
            raise ConfigError(
                f"unknown preset dataset {dataset!r}, expected one of {tuple(self.table)}"
            )
        return self.table[dataset]

    def pipeline(self, dataset: str) -> dict:
        return dict(self._block(dataset)["pipeline"])

    def cell(self, dataset: str, solver: str, affinity: str) -> dict:
        """Parameters of one grid cell: lambda plus k_top or alpha when used."""
        if solver not in SOLVER_COLUMNS:
            raise ConfigError(f"unknown solver {solver!r}")
        if affinity not in AFFINITY_ROWS:
            raise ConfigError(f"unknown affinity {affinity!r}")
        raw = self._block(dataset)["solvers"][solver]
        out = {"lambda": raw["lambda"]}
        if affinity == "ssm":
            out["k_top"] = raw["ssm_k"]
        elif affinity == "svdm":
            out["alpha"] = raw["svdm_alpha"]
        elif affinity == "ipm":
            out["alpha"] = raw["ipm_alpha"]
        return out

    def solver_config(self, dataset: str, solver: str) -> SolverConfig:
        raw = self._block(dataset)["solvers"][solver]
        return default_solver_config(solver, lam=raw["lambda"])

    def affinity_config(self, dataset: str, solver: str, affinity: str) -> AffinityConfig:
        params = self.cell(dataset, solver, affinity)
        kwargs = {}
        if "k_top" in params:
            kwargs["k_top"] = int(params["k_top"])
        if "alpha" in params:
            kwargs["alpha"] = float(params["alpha"])
        return AffinityConfig(**kwargs)


def materialize_dataset(source: DatasetFiles | SyntheticSpec) -> Dataset:
    """Load the dataset files or generate the synthetic instance."""
    if isinstance(source, SyntheticSpec):
        return generate_synthetic(source)
    return load_dataset(source.matrix_path, source.labels_path, source.format)


def _trial_accuracies(W, truth, n_clusters, seeds, restarts, laplacian):
    spectral_cfg = SpectralConfig(
        n_clusters=n_clusters,
        seed=0,
        kmeans_restarts=restarts,
        laplacian=laplacian,
    )
    embedding = spectral_embed(W, spectral_cfg)
    accuracies = []
    for seed in seeds:
        labels = kmeans(embedding, n_clusters, seed=seed, restarts=restarts)
        accuracies.append(clustering_accuracy(labels, truth))
    return accuracies


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment: solve, build affinity, repeat seeded clustering trials."""
    t0 = time.perf_counter()
    ds = prepare_dataset(materialize_dataset(cfg.dataset), cfg.pca_dim, cfg.normalize)
    solver_cfg = cfg.solver_config or default_solver_config(cfg.solver)
    seeds = [trial_seed(cfg.master_seed, i) for i in range(cfg.trials)]

    if cfg.resolve_per_trial:
        accuracies = []
        converged = []
        for seed in seeds:
            C = solve(cfg.solver, ds.matrix, solver_cfg)
            converged.append(1.0 if C.report.converged else 0.0)
            W = build_affinity(cfg.affinity, C, ds.matrix, cfg.affinity_config)
            accuracies.extend(
                _trial_accuracies(
                    W, ds.truth, cfg.n_clusters, [seed], cfg.kmeans_restarts, cfg.laplacian
                )
            )
        fraction = float(np.mean(converged))
    else:
        C = solve(cfg.solver, ds.matrix, solver_cfg)
        W = build_affinity(cfg.affinity, C, ds.matrix, cfg.affinity_config)
        accuracies = _trial_accuracies(
            W, ds.truth, cfg.n_clusters, seeds, cfg.kmeans_restarts, cfg.laplacian
        )
        fraction = 1.0 if C.report.converged else 0.0
    return summarize_trials(accuracies, time.perf_counter() - t0, fraction)


@dataclass(frozen=True)
class GridResult:
    """Results of the full 4x4 solver/affinity grid; failures recorded per cell."""

    cells: dict
    errors: dict
    trials: int
    master_seed: int


def run_grid(
    dataset: Dataset,
    presets: PresetTable | None = None,
    trials: int = 20,
    master_seed: int = 0,
    *,
    preset_name: str | None = None,
    n_clusters: int | None = None,
    kmeans_restarts: int = 10,
    laplacian: str = "symmetric_normalized",
) -> GridResult:
    """Run all 16 solver/affinity combinations on an already-prepared dataset.

    Each solver's coefficient matrix is computed once and reused across its
    four affinities. A failing cell records its error and the grid continues.
    """
    if presets is not None and preset_name is None:
        raise ConfigError("preset_name is required when a PresetTable is supplied")
    k = n_clusters if n_clusters is not None else dataset.truth.k
    cells = {}
    errors = {}
    for solver in SOLVER_COLUMNS:
        scfg = (
            presets.solver_config(preset_name, solver)
            if presets is not None
            else default_solver_config(solver)
        )
        try:
            C = solve(solver, dataset.matrix, scfg)
        except Exception as exc:  # a dead solver must not kill the grid
            for affinity in AFFINITY_ROWS:
                errors[(solver, affinity)] = f"{type(exc).__name__}: {exc}"
            continue
        fraction = 1.0 if C.report.converged else 0.0
        for affinity in AFFINITY_ROWS:
            acfg = (
                presets.affinity_config(preset_name, solver, affinity)
                if presets is not None
                else AffinityConfig()
            )
            t0 = time.perf_counter()
            try:
                W = build_affinity(affinity, C, dataset.matrix, acfg)
                seeds = [trial_seed(master_seed, i) for i in range(trials)]
                accuracies = _trial_accuracies(
                    W, dataset.truth, k, seeds, kmeans_restarts, laplacian
                )
                cells[(solver, affinity)] = summarize_trials(
                    accuracies, time.perf_counter() - t0, fraction
                )
            except Exception as exc:
                errors[(solver, affinity)] = f"{type(exc).__name__}: {exc}"
    return GridResult(cells=cells, errors=errors, trials=trials, master_seed=master_seed)


def _cell_text(grid: GridResult, solver: str, affinity: str, indicator: str) -> str:
    cell = grid.cells.get((solver, affinity))
    if cell is None:
        return "ERR"
    return f"{getattr(cell, indicator.lower()):.2f}"


def emit_table(grid: GridResult, format: str = "console") -> str:
    """Render the grid grouped by affinity then indicator, columns LSR SMR LRRSC SSC."""
    if format == "csv":
        lines = ["method,indicator," + ",".join(s.upper() for s in SOLVER_COLUMNS)]
        for affinity in AFFINITY_ROWS:
            for indicator in INDICATORS:
                values = [_cell_text(grid, s, affinity, indicator) for s in SOLVER_COLUMNS]
                lines.append(f"{affinity.upper()},{indicator}," + ",".join(values))
        return "\n".join(lines) + "\n"
    if format == "console":
        header = f"{'Method':<8}{'indicator':<11}" + "".join(
            f"{s.upper():>9}" for s in SOLVER_COLUMNS
        )
        lines = [header]
        for affinity in AFFINITY_ROWS:
            for row, indicator in enumerate(INDICATORS):
                label = affinity.upper() if row == 0 else ""
                values = "".join(
                    f"{_cell_text(grid, s, affinity, indicator):>9}" for s in SOLVER_COLUMNS
                )
                lines.append(f"{label:<8}{indicator:<11}" + values)
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown table format {format!r}, expected 'console' or 'csv'")


_SOLVER_CONFIG_KEYS = {
    "lambda": "lam",
    "tol": "tol",
    "max_iter": "max_iter",
    "penalty_init": "penalty_init",
    "penalty_growth": "penalty_growth",
    "diag_constraint": "diag_constraint",
    "k_graph": "k_graph",
    "epsilon": "epsilon",
    "lambda_z": "lambda_z",
}

_AFFINITY_CONFIG_KEYS = ("k_top", "alpha", "rank_delta", "side", "ipm_denominator", "zero_diagonal")

_SYNTHETIC_KEYS = (
    "num_subspaces",
    "subspace_dim",
    "ambient_dim",
    "points_per_subspace",
    "noise_sigma",
    "seed",
    "independent",
)

_TOP_LEVEL_KEYS = (
    "dataset",
    "solver",
    "affinity",
    "n_clusters",
    "solver_config",
    "affinity_config",
    "pca_dim",
    "normalize",
    "trials",
    "master_seed",
    "resolve_per_trial",
    "kmeans_restarts",
    "laplacian",
)


def _reject_unknown(obj: dict, allowed, context: str) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {context}")


def _parse_dataset(obj: dict) -> DatasetFiles | SyntheticSpec:
    if not isinstance(obj, dict):
        raise ConfigError("dataset must be an object")
    if "synthetic" in obj:
        _reject_unknown(obj, ("synthetic",), "dataset")
        spec = obj["synthetic"]
        _reject_unknown(spec, _SYNTHETIC_KEYS, "dataset.synthetic")
        return SyntheticSpec(**spec)
    _reject_unknown(obj, ("matrix_path", "labels_path", "format"), "dataset")
    for required in ("matrix_path", "labels_path"):
        if required not in obj:
            raise ConfigError(f"dataset.{required} is required")
    return DatasetFiles(**obj)


def parse_experiment_config(obj: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON-style dict, rejecting unknown keys."""
    if not isinstance(obj, dict):
        raise ConfigError("experiment config must be an object")
    _reject_unknown(obj, _TOP_LEVEL_KEYS, "experiment config")
    for required in ("dataset", "solver", "affinity", "n_clusters"):
        if required not in obj:
            raise ConfigError(f"experiment config key {required!r} is required")
    solver = obj["solver"]
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}")

    solver_cfg = None
    if "solver_config" in obj:
        raw = obj["solver_config"]
        _reject_unknown(raw, _SOLVER_CONFIG_KEYS, "solver_config")
        solver_cfg = default_solver_config(
            solver, **{_SOLVER_CONFIG_KEYS[key]: value for key, value in raw.items()}
        )
    affinity_cfg = AffinityConfig()
    if "affinity_config" in obj:
        raw = obj["affinity_config"]
        _reject_unknown(raw, _AFFINITY_CONFIG_KEYS, "affinity_config")
        affinity_cfg = AffinityConfig(**raw)

    kwargs = {
        key: obj[key]
        for key in (
            "n_clusters",
            "pca_dim",
            "normalize",
            "trials",
            "master_seed",
            "resolve_per_trial",
            "kmeans_restarts",
            "laplacian",
        )
        if key in obj
    }
    return ExperimentConfig(
        dataset=_parse_dataset(obj["dataset"]),
        solver=solver,
        affinity=obj["affinity"],
        solver_config=solver_cfg,
        affinity_config=affinity_cfg,
        **kwargs,
    )


def load_experiment_config(path) -> ExperimentConfig:
    """Parse an experiment config JSON file."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_experiment_config(obj)
