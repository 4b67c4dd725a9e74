"""Module running seeded simulation sweeps.

An experiment is described by a YAML file, for example::

    truth: {kind: nonspiky, m: 200, n: 200, rank_star: 1}
    model: {kind: probit, sigma: 1.0}
    rho: 0.8
    solver: {rank: 1, tol: 1.0e-4}
    sweep: {axis: rho, values: [0.2, 0.4, 0.6, 0.8, 1.0]}
    replicates: 20
    seed: 12345

Every grid point and replicate gets its own seeds derived from the master
seed, so that any single run can be repeated independently of the others.
"""

__all__ = ['ConfigError', 'SweepAxis', 'ExperimentConfig', 'RunSpec', 'Seeds',
           'ReplicateResult', 'MedianRow', 'METRICS', 'load_config', 'config_from_dict',
           'derive_seeds', 'make_run_spec', 'run_replicate', 'run_sweep', 'summarize', 'fit_loglog_slope',
           'write_long_csv', 'write_medians_csv', 'sweep_slopes']

import concurrent.futures
import csv
import dataclasses
import enum
import logging
import math
import time
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import metrics, synth
from .linkfun import LinkModel
from .solver import SolverConfig, select_rank, solve

_log = logging.getLogger(__name__)

METRICS = ("relative_error", "hellinger", "runtime_seconds", "chosen_rank",
           "outer_iterations", "full_steps", "full_step_fraction", "spikiness")
"""Names of metrics recorded for every replicate."""


class ConfigError(ValueError):
    """Class for exceptions raised for invalid experiment configuration.
    """
    pass


@enum.unique
class SweepAxis(enum.Enum):
    """Namespace for constants defining parameters which can be swept.
    """

    SIGMA = "sigma"
    """Noise scale of the link model."""

    RHO = "rho"
    """Fraction of observed entries."""

    N = "n"
    """Size of a square matrix, ``m = n``."""

    RANK_STAR = "rank_star"
    """Rank of ground truth."""

    NU = "nu"
    """Degrees of freedom of spiky factors."""


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of a simulation sweep.

    Attributes
    ----------
    truth_kind : `~mmgn4py.synth.TruthKind`
    m, n : `int`
    rank_star : `int`
    nu : `float` or ``None``
        Degrees of freedom, required for spiky truth.
    model : `~mmgn4py.linkfun.LinkModel`
        Model used to draw labels.
    solver_model : `~mmgn4py.linkfun.LinkModel` or ``None``
        Model given to the solver, same as ``model`` if ``None``.
    rho : `float`
    solver : `~mmgn4py.solver.SolverConfig`
    candidate_ranks : `tuple` [ `int` ] or ``None``
        If given then rank is selected on validation set.
    split_fraction : `float`
        Validation fraction for rank selection.
    sweep_axis : `SweepAxis` or ``None``
    sweep_values : `tuple` [ `float` ]
    replicates : `int`
    seed : `int`
        Master seed.
    output : `str`
        Output directory.
    """
    truth_kind: synth.TruthKind
    m: int
    n: int
    rank_star: int
    nu: Optional[float]
    model: LinkModel
    solver_model: Optional[LinkModel]
    rho: float
    solver: SolverConfig
    candidate_ranks: Optional[Tuple[int, ...]] = None
    split_fraction: float = 0.2
    sweep_axis: Optional[SweepAxis] = None
    sweep_values: Tuple[float, ...] = ()
    replicates: int = 20
    seed: int = 0
    output: str = "."

    def grid(self) -> List[Optional[float]]:
        """List of swept values, ``[None]`` if nothing is swept."""
        if self.sweep_axis is None:
            return [None]
        return list(self.sweep_values)

    def to_dict(self) -> Dict[str, Any]:
        """Return dictionary in the format accepted by `load_config`."""
        result: Dict[str, Any] = dict(
            truth=dict(kind=self.truth_kind.value, m=self.m, n=self.n,
                       rank_star=self.rank_star, nu=self.nu),
            model=dict(kind=self.model.kind.value, sigma=self.model.sigma),
            rho=self.rho,
            solver=dict(rank=self.solver.rank, tol=self.solver.tol,
                        max_outer_iter=self.solver.max_outer_iter,
                        init=self.solver.init.value,
                        candidate_ranks=(list(self.candidate_ranks)
                                         if self.candidate_ranks else None),
                        split_fraction=self.split_fraction),
            replicates=self.replicates,
            seed=self.seed,
            output=self.output)
        if self.solver_model is not None:
            result["solver_model"] = dict(kind=self.solver_model.kind.value,
                                          sigma=self.solver_model.sigma)
        if self.sweep_axis is not None:
            result["sweep"] = dict(axis=self.sweep_axis.value, values=list(self.sweep_values))
        return result


class Seeds(NamedTuple):
    """Seeds of one replicate."""
    truth: int
    omega: int
    labels: int
    solver: int


@dataclasses.dataclass(frozen=True)
class RunSpec:
    """Parameters of one grid point, sweep value already applied."""
    truth_kind: synth.TruthKind
    m: int
    n: int
    rank_star: int
    nu: Optional[float]
    model: LinkModel
    solver_model: LinkModel
    rho: float
    solver: SolverConfig
    candidate_ranks: Optional[Tuple[int, ...]]
    split_fraction: float


class ReplicateResult(NamedTuple):
    """Outcome of one replicate at one grid point.

    Attributes
    ----------
    grid_index : `int`
    axis_value : `float` or ``None``
    replicate : `int`
    metrics : `dict` [ `str`, `float` ]
        Empty if replicate failed.
    error : `str` or ``None``
        Error message of a failed replicate.
    """
    grid_index: int
    axis_value: Optional[float]
    replicate: int
    metrics: Dict[str, float]
    error: Optional[str]


class MedianRow(NamedTuple):
    """Median of one metric at one grid point."""
    grid_index: int
    axis_value: Optional[float]
    metric: str
    median: float
    count: int


_TOP_KEYS = {"truth", "model", "solver_model", "rho", "solver", "sweep", "replicates",
             "seed", "output"}


def _section(data: Dict[str, Any], key: str, required: bool = True) -> Dict[str, Any]:
    value = data.get(key)
    if value is None:
        if required:
            raise ConfigError("Missing required section `{0}'".format(key))
        return {}
    if not isinstance(value, dict):
        raise ConfigError("Section `{0}' must be a mapping".format(key))
    return value


def _model(section: Dict[str, Any]) -> LinkModel:
    return LinkModel(section.get("kind", "probit"), float(section.get("sigma", 1.0)))


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Build `ExperimentConfig` from a parsed dictionary.

    Raises
    ------
    ConfigError
        Raised for missing sections, unknown keys or invalid values.
    """
    if not isinstance(data, dict):
        raise ConfigError("Experiment configuration must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError("Unknown configuration keys: {0}".format(", ".join(sorted(unknown))))
    try:
        truth = _section(data, "truth")
        model = _model(_section(data, "model"))
        solver_section = _section(data, "solver", required=False)
        sweep = _section(data, "sweep", required=False)
        solver_model = None
        if data.get("solver_model") is not None:
            solver_model = _model(_section(data, "solver_model"))

        candidates = solver_section.get("candidate_ranks")
        candidate_ranks = tuple(int(r) for r in candidates) if candidates else None
        rank = solver_section.get("rank")
        if rank is None:
            if candidate_ranks is None:
                raise ConfigError("Solver needs `rank' or `candidate_ranks'")
            rank = min(candidate_ranks)
        solver = SolverConfig(rank=int(rank),
                              tol=float(solver_section.get("tol", 1e-4)),
                              max_outer_iter=int(solver_section.get("max_outer_iter", 1000)),
                              init=solver_section.get("init", "spectral"))

        axis = None
        values: Tuple[float, ...] = ()
        if sweep:
            axis = SweepAxis(sweep.get("axis"))
            values = tuple(float(v) for v in sweep.get("values") or ())
            if not values:
                raise ConfigError("Sweep values must not be empty")

        nu = truth.get("nu")
        config = ExperimentConfig(
            truth_kind=synth.TruthKind(truth.get("kind", "nonspiky")),
            m=int(truth["m"]),
            n=int(truth.get("n", truth["m"])),
            rank_star=int(truth.get("rank_star", 1)),
            nu=None if nu is None else float(nu),
            model=model,
            solver_model=solver_model,
            rho=float(data.get("rho", 1.0)),
            solver=solver,
            candidate_ranks=candidate_ranks,
            split_fraction=float(solver_section.get("split_fraction", 0.2)),
            sweep_axis=axis,
            sweep_values=values,
            replicates=int(data.get("replicates", 20)),
            seed=int(data.get("seed", 0)),
            output=str(data.get("output", ".")))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("Invalid experiment configuration: {0}".format(exc)) from exc

    if config.replicates < 1:
        raise ConfigError("Number of replicates must be positive")
    # validate every grid point up front
    try:
        for value in config.grid():
            make_run_spec(config, value)
    except ValueError as exc:
        raise ConfigError("Invalid grid point: {0}".format(exc)) from exc
    return config


def load_config(path: str) -> ExperimentConfig:
    """Read experiment configuration from YAML (or JSON) file.

    Raises
    ------
    ConfigError
        Raised if file cannot be parsed or describes invalid experiment.
    """
    with open(path) as file:
        try:
            data = yaml.safe_load(file)
        except yaml.YAMLError as exc:
            raise ConfigError("Failed to parse {0}: {1}".format(path, exc)) from exc
    return config_from_dict(data)


def derive_seeds(master: int, grid_index: int, replicate: int) -> Seeds:
    """Derive independent seeds for one replicate.

    Seeds are taken from `numpy.random.SeedSequence` with entropy
    ``(master, grid_index, replicate)``, streams of different replicates
    do not overlap.
    """
    state = np.random.SeedSequence([master, grid_index, replicate]).generate_state(4)
    return Seeds(*(int(s) for s in state))


def make_run_spec(config: ExperimentConfig, value: Optional[float]) -> RunSpec:
    """Apply swept value to configuration.

    Raises
    ------
    ValueError
        Raised if resulting parameters are invalid.
    """
    m, n, rank_star, nu, rho = config.m, config.n, config.rank_star, config.nu, config.rho
    model = config.model
    solver_model = config.solver_model or config.model
    axis = config.sweep_axis
    if axis is SweepAxis.SIGMA:
        model = dataclasses.replace(model, sigma=value)
        solver_model = dataclasses.replace(solver_model, sigma=value)
    elif axis is SweepAxis.RHO:
        rho = float(value)
    elif axis is SweepAxis.N:
        m = n = int(value)
    elif axis is SweepAxis.RANK_STAR:
        rank_star = int(value)
    elif axis is SweepAxis.NU:
        if config.truth_kind is not synth.TruthKind.SPIKY:
            raise ValueError("Sweep over nu needs spiky ground truth")
        nu = float(value)

    if not 0 < rho <= 1:
        raise ValueError("Observed fraction must be in (0, 1], got {0}".format(rho))
    if not 1 <= rank_star <= min(m, n):
        raise ValueError("Rank {0} out of range for {1}x{2} matrix".format(rank_star, m, n))
    if config.truth_kind is synth.TruthKind.SPIKY and (nu is None or nu <= 2):
        raise ValueError("Spiky ground truth needs nu > 2")
    ranks = config.candidate_ranks or (config.solver.rank,)
    if max(ranks) > min(m, n):
        raise ValueError("Solver rank exceeds matrix size {0}x{1}".format(m, n))
    return RunSpec(truth_kind=config.truth_kind, m=m, n=n, rank_star=rank_star, nu=nu,
                   model=model, solver_model=solver_model, rho=rho, solver=config.solver,
                   candidate_ranks=config.candidate_ranks,
                   split_fraction=config.split_fraction)


def run_replicate(config: ExperimentConfig, grid_index: int, replicate: int) -> ReplicateResult:
    """Generate data, solve and evaluate one replicate.

    Parameters
    ----------
    config : `ExperimentConfig`
        Experiment.
    grid_index : `int`
        Index into ``config.grid()``.
    replicate : `int`
        Replicate number.

    Returns
    -------
    result : `ReplicateResult`
        Metrics of the replicate. Runtime covers solving (and rank
        selection) only.
    """
    value = config.grid()[grid_index]
    spec = make_run_spec(config, value)
    seeds = derive_seeds(config.seed, grid_index, replicate)

    truth = synth.make_truth(spec.truth_kind, spec.m, spec.n, spec.rank_star, seeds.truth,
                             nu=spec.nu)
    omega = synth.sample_omega(spec.m, spec.n, spec.rho, seeds.omega)
    obs = synth.sample_labels(truth, omega, spec.model, seeds.labels)
    solver_config = dataclasses.replace(spec.solver, seed=seeds.solver)

    start = time.perf_counter()
    if spec.candidate_ranks:
        selection = select_rank(obs, spec.solver_model, spec.candidate_ranks,
                                split_fraction=spec.split_fraction, seed=seeds.solver,
                                config=solver_config)
        report = selection.report
        assert report is not None
        chosen = selection.chosen_rank
    else:
        report = solve(obs, spec.solver_model, solver_config)
        chosen = solver_config.rank
    runtime = time.perf_counter() - start

    result = dict(relative_error=metrics.relative_error(report.factors, truth),
                  hellinger=metrics.hellinger_from_factors(report.factors, truth, spec.model),
                  runtime_seconds=runtime,
                  chosen_rank=float(chosen),
                  outer_iterations=float(report.outer_iterations),
                  full_steps=float(sum(1 for a in report.step_sizes if a == 1.0)),
                  full_step_fraction=report.full_step_fraction,
                  spikiness=truth.spikiness)
    _log.info("grid point %d (%s) replicate %d: relative error %.4g, %.2f sec",
              grid_index, value, replicate, result["relative_error"], runtime)
    return ReplicateResult(grid_index=grid_index, axis_value=value, replicate=replicate,
                           metrics=result, error=None)


def _run_safe(config: ExperimentConfig, grid_index: int, replicate: int) -> ReplicateResult:
    try:
        return run_replicate(config, grid_index, replicate)
    except Exception as exc:
        _log.error("grid point %d replicate %d failed: %s", grid_index, replicate, exc)
        return ReplicateResult(grid_index=grid_index, axis_value=config.grid()[grid_index],
                               replicate=replicate, metrics={}, error=str(exc))


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> List[ReplicateResult]:
    """Run every replicate of every grid point.

    Parameters
    ----------
    config : `ExperimentConfig`
        Experiment.
    jobs : `int`, optional
        Number of worker processes, 1 runs everything in this process.

    Returns
    -------
    results : `list` [ `ReplicateResult` ]
        Results ordered by grid point and replicate; failed replicates
        carry an error message and the sweep continues.
    """
    tasks = [(gi, rep) for gi in range(len(config.grid())) for rep in range(config.replicates)]
    _log.info("running %d replicates on %d grid points", len(tasks), len(config.grid()))
    if jobs <= 1:
        return [_run_safe(config, gi, rep) for gi, rep in tasks]

    results = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(_run_safe, config, gi, rep): (gi, rep) for gi, rep in tasks}
        for future in concurrent.futures.as_completed(futures):
            gi, rep = futures[future]
            try:
                results.append(future.result())
            except Exception as exc:
                _log.error("worker for grid point %d replicate %d failed: %s", gi, rep, exc)
                results.append(ReplicateResult(grid_index=gi, axis_value=config.grid()[gi],
                                               replicate=rep, metrics={}, error=str(exc)))
    results.sort(key=lambda res: (res.grid_index, res.replicate))
    return results


def summarize(results: Sequence[ReplicateResult]) -> List[MedianRow]:
    """Compute median of each metric at each grid point.

    Returns
    -------
    rows : `list` [ `MedianRow` ]
        Exactly one row per grid point and metric; median is NaN and count
        zero if all replicates failed.
    """
    points: Dict[int, Optional[float]] = {}
    for res in results:
        points.setdefault(res.grid_index, res.axis_value)
    rows = []
    for grid_index in sorted(points):
        for metric in METRICS:
            values = [res.metrics[metric] for res in results
                      if res.grid_index == grid_index and res.error is None]
            median = float(np.median(values)) if values else math.nan
            rows.append(MedianRow(grid_index=grid_index, axis_value=points[grid_index],
                                  metric=metric, median=median, count=len(values)))
    return rows


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    Raises
    ------
    ValueError
        Raised for non-positive values or fewer than two points.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if x_arr.shape != y_arr.shape or x_arr.size < 2:
        raise ValueError("Need at least two points of equal length")
    if np.any(x_arr <= 0) or np.any(y_arr <= 0):
        raise ValueError("Log-log fit needs positive values")
    slope, _ = np.polyfit(np.log(x_arr), np.log(y_arr), 1)
    return float(slope)


def sweep_slopes(config: ExperimentConfig, medians: Sequence[MedianRow]) -> Dict[str, float]:
    """Log-log slopes of median errors against the swept value, computed
    for ``rho`` and ``n`` sweeps only.
    """
    if config.sweep_axis not in (SweepAxis.RHO, SweepAxis.N):
        return {}
    slopes = {}
    for metric in ("relative_error", "hellinger"):
        points = [(row.axis_value, row.median) for row in medians
                  if row.metric == metric and row.count > 0]
        try:
            slopes[metric] = fit_loglog_slope([p[0] for p in points], [p[1] for p in points])
        except ValueError as exc:
            _log.warning("cannot fit slope for %s: %s", metric, exc)
    return slopes


def write_long_csv(config: ExperimentConfig, results: Sequence[ReplicateResult],
                   path: str) -> None:
    """Write one row per replicate, grid point and metric; failed
    replicates produce one row with the error message.
    """
    axis = config.sweep_axis.value if config.sweep_axis else ""
    with open(path, "w", newline='') as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["grid_index", "axis", "axis_value", "replicate", "metric", "value",
                         "error"])
        for res in results:
            value = "" if res.axis_value is None else repr(res.axis_value)
            if res.error is not None:
                writer.writerow([res.grid_index, axis, value, res.replicate, "", "", res.error])
                continue
            for metric in METRICS:
                writer.writerow([res.grid_index, axis, value, res.replicate, metric,
                                 repr(res.metrics[metric]), ""])


def write_medians_csv(config: ExperimentConfig, medians: Sequence[MedianRow], path: str) -> None:
    """Write medians table, one row per grid point and metric."""
    axis = config.sweep_axis.value if config.sweep_axis else ""
    with open(path, "w", newline='') as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["grid_index", "axis", "axis_value", "metric", "median", "count"])
        for row in medians:
            value = "" if row.axis_value is None else repr(row.axis_value)
            writer.writerow([row.grid_index, axis, value, row.metric, repr(row.median),
                             row.count])
