"""Module with the majorization-minimization Gauss-Newton driver.

Each outer iteration builds the quadratic majorization at the current
factors, takes a single Gauss-Newton step on it with the least-norm
update, and safeguards the step with Armijo backtracking on the
likelihood itself. Iterations stop when the relative change of the
negative log-likelihood drops below a tolerance.
"""

__all__ = ['InitKind', 'StopReason', 'ArmijoParams', 'InnerParams', 'SolverConfig',
           'SolveReport', 'StepOutcome', 'RankSelection', 'initialize', 'armijo_backtrack',
           'mmgn_step', 'solve', 'select_rank']

import concurrent.futures
import dataclasses
import enum
import logging
import math
import time
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sp_linalg_dense
from scipy.sparse import linalg as sp_linalg

from . import gnstep
from .linkfun import LinkModel
from .majorize import build_target
from .objective import FactorPair, neg_log_lik, neg_log_lik_theta, predict_on_omega
from .obsdata import ObservationSet, split

_log = logging.getLogger(__name__)

# problems up to this many cells use dense SVD for initialization
_DENSE_SVD_LIMIT = 4_000_000

# relative slack when comparing validation likelihoods of candidate ranks
_TIE_SLACK = 1e-12


@enum.unique
class InitKind(enum.Enum):
    """Namespace for constants defining initialization of factors.
    """

    SPECTRAL = "spectral"
    """Truncated SVD of the rescaled zero-filled label matrix."""

    RANDOM = "random"
    """Independent standard normal entries scaled by ``1/sqrt(r)``."""


@enum.unique
class StopReason(enum.Enum):
    """Namespace for constants describing why outer iterations stopped.
    """

    TOL_MET = "tol_met"
    """Relative change of likelihood dropped below tolerance."""

    MAX_ITER = "max_iter"
    """Maximum number of outer iterations reached."""

    STALLED = "stalled"
    """Line search could not find a decreasing step."""


@dataclasses.dataclass(frozen=True)
class ArmijoParams:
    """Parameters of the backtracking line search.

    Attributes
    ----------
    c1 : `float`
        Sufficient decrease constant, in (0, 1).
    shrink : `float`
        Step reduction factor, in (0, 1).
    max_backtracks : `int`
        Number of reductions before giving up.
    """
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 20

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("Armijo c1 must be in (0, 1), got {0}".format(self.c1))
        if not 0 < self.shrink < 1:
            raise ValueError("Armijo shrink must be in (0, 1), got {0}".format(self.shrink))
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be non-negative")


@dataclasses.dataclass(frozen=True)
class InnerParams:
    """Parameters of the inner LSQR solver.

    Attributes
    ----------
    tol : `float`
        Relative tolerance for LSQR.
    max_iter : `int` or ``None``
        Iteration cap, ``None`` means ``min(1000, 2 (m + n) r)``.
    """
    tol: float = 1e-6
    max_iter: Optional[int] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Inner tolerance must be positive, got {0}".format(self.tol))
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("Inner max_iter must be positive")


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Settings for one solver run.

    Attributes
    ----------
    rank : `int`
        Target rank of the estimate.
    tol : `float`
        Tolerance on relative change of the negative log-likelihood.
    max_outer_iter : `int`
        Maximum number of outer iterations.
    armijo : `ArmijoParams`
        Line search parameters.
    inner : `InnerParams`
        Inner solver parameters.
    init : `InitKind`
        Initialization method, strings are accepted too.
    seed : `int`
        Seed for random initialization.
    """
    rank: int
    tol: float = 1e-4
    max_outer_iter: int = 1000
    armijo: ArmijoParams = ArmijoParams()
    inner: InnerParams = InnerParams()
    init: InitKind = InitKind.SPECTRAL
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("Rank must be positive, got {0}".format(self.rank))
        if not self.tol > 0:
            raise ValueError("Tolerance must be positive, got {0}".format(self.tol))
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be positive")
        if not isinstance(self.init, InitKind):
            object.__setattr__(self, "init", InitKind(self.init))


@dataclasses.dataclass
class SolveReport:
    """Result of a solver run.

    Attributes
    ----------
    factors : `~mmgn4py.objective.FactorPair`
        Fitted factors, estimate is ``U V^T``.
    ll_trace : `list` [ `float` ]
        Negative log-likelihood at the initial point and after each
        accepted iteration, non-increasing.
    step_sizes : `list` [ `float` ]
        Accepted step size of each iteration, in (0, 1].
    outer_iterations : `int`
        Number of accepted iterations.
    stop_reason : `StopReason`
        Reason for stopping.
    inner_iterations : `list` [ `int` ]
        LSQR iterations of each accepted iteration.
    runtime_seconds : `float`
        Wall-clock time of the run.
    """
    factors: FactorPair
    ll_trace: List[float]
    step_sizes: List[float]
    outer_iterations: int
    stop_reason: StopReason
    inner_iterations: List[int] = dataclasses.field(default_factory=list)
    runtime_seconds: float = 0.0

    @property
    def final_ll(self) -> float:
        return self.ll_trace[-1]

    @property
    def full_step_fraction(self) -> float:
        """Fraction of iterations which accepted the full step (`float`)."""
        if not self.step_sizes:
            return 1.0
        return sum(1 for alpha in self.step_sizes if alpha == 1.0) / len(self.step_sizes)

    def to_dict(self) -> Dict[str, Any]:
        """Return JSON-compatible summary, without factor matrices."""
        return dict(rank=self.factors.rank,
                    m=self.factors.m,
                    n=self.factors.n,
                    ll_trace=list(self.ll_trace),
                    step_sizes=list(self.step_sizes),
                    inner_iterations=list(self.inner_iterations),
                    outer_iterations=self.outer_iterations,
                    stop_reason=self.stop_reason.value,
                    full_step_fraction=self.full_step_fraction,
                    runtime_seconds=self.runtime_seconds)


class StepOutcome(NamedTuple):
    """Result of one outer iteration.

    Attributes
    ----------
    factors : `~mmgn4py.objective.FactorPair`
        Accepted factors, unchanged if the step stalled.
    alpha : `float`
        Accepted step size, 0 if stalled.
    ll_new : `float`
        Negative log-likelihood at accepted factors.
    stalled : `bool`
        ``True`` if no step satisfied sufficient decrease.
    inner_iterations : `int`
        LSQR iterations spent on the step.
    converged : `bool`
        Whether LSQR met its tolerances.
    """
    factors: FactorPair
    alpha: float
    ll_new: float
    stalled: bool
    inner_iterations: int
    converged: bool


class RankSelection(NamedTuple):
    """Result of validation-based rank selection.

    Attributes
    ----------
    chosen_rank : `int`
        Rank with the largest validation log-likelihood.
    per_rank_validation_ll : `list` [ (`int`, `float`) ]
        Validation log-likelihood for each candidate rank.
    report : `SolveReport` or ``None``
        Fit at the chosen rank on all observations, if requested.
    """
    chosen_rank: int
    per_rank_validation_ll: List[Tuple[int, float]]
    report: Optional[SolveReport]


def initialize(obs: ObservationSet, r: int, kind: InitKind = InitKind.SPECTRAL,
               seed: int = 0) -> FactorPair:
    """Make initial factors.

    Parameters
    ----------
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observations.
    r : `int`
        Rank, ``1 <= r <= min(m, n)``.
    kind : `InitKind`, optional
        Initialization method.
    seed : `int`, optional
        Seed for random generator.

    Returns
    -------
    factors : `~mmgn4py.objective.FactorPair`
        For spectral initialization ``U = A S^(1/2)`` and ``V = B S^(1/2)``
        from the rank-r SVD ``A S B^T`` of the matrix with ``y/rho`` on
        observed entries and zeros elsewhere.

    Raises
    ------
    ValueError
        Raised if rank is out of range.
    """
    m, n = obs.shape
    if not 1 <= r <= min(m, n):
        raise ValueError("Rank {0} out of range [1, {1}]".format(r, min(m, n)))
    kind = InitKind(kind)
    rng = np.random.default_rng(seed)
    if kind is InitKind.RANDOM:
        scale = 1. / math.sqrt(r)
        return FactorPair(rng.standard_normal((m, r)) * scale,
                          rng.standard_normal((n, r)) * scale)

    if obs.size == 0:
        return FactorPair(np.zeros((m, r)), np.zeros((n, r)))
    fill = obs.to_csc() * (1. / obs.density)
    if m * n <= _DENSE_SVD_LIMIT or r >= min(m, n) - 1:
        a, s, bt = sp_linalg_dense.svd(fill.toarray(), full_matrices=False)
        a, s, b = a[:, :r], s[:r], bt[:r].T
    else:
        v0 = rng.standard_normal(min(m, n))
        a, s, bt = sp_linalg.svds(fill, k=r, v0=v0)
        order = np.argsort(s)[::-1]
        a, s, b = a[:, order], s[order], bt[order].T
    root = np.sqrt(s)
    return FactorPair(a * root, b * root)


def armijo_backtrack(fun: Callable[[float], float], f0: float, slope: float,
                     params: ArmijoParams) -> Tuple[float, float]:
    """Find step size satisfying the sufficient decrease condition.

    Parameters
    ----------
    fun : `callable`
        Function of step size returning objective value.
    f0 : `float`
        Objective at zero step.
    slope : `float`
        Directional derivative at zero step, negative for descent.
    params : `ArmijoParams`
        Line search parameters.

    Returns
    -------
    alpha : `float`
        Accepted step size starting from 1, 0 if no step was accepted.
    value : `float`
        Objective at accepted step, ``f0`` if no step was accepted.
    """
    alpha = 1.0
    for _ in range(params.max_backtracks + 1):
        value = fun(alpha)
        if math.isfinite(value) and value <= f0 + params.c1 * alpha * min(slope, 0.):
            return alpha, value
        _log.debug("    backtrack: alpha=%g value=%g f0=%g", alpha, value, f0)
        alpha *= params.shrink
    return 0.0, f0


def mmgn_step(f: FactorPair, obs: ObservationSet, model: LinkModel,
              config: SolverConfig) -> StepOutcome:
    """Perform one majorization-minimization Gauss-Newton iteration.

    Parameters
    ----------
    f : `~mmgn4py.objective.FactorPair`
        Current factors.
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observations.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.
    config : `SolverConfig`
        Solver settings.

    Returns
    -------
    outcome : `StepOutcome`
        New factors, step size and likelihood; negative log-likelihood of
        the returned factors never exceeds the current one.
    """
    target = build_target(f, obs, model)
    ll_current = target.anchor_ll
    op = gnstep.JacobianOperator(f, obs)
    step = gnstep.solve_min_norm(op, target.x_values, tol=config.inner.tol,
                                 max_iter=config.inner.max_iter)
    if not step.converged:
        _log.warning("inner solver stopped with code %d after %d iterations",
                     step.stop_code, step.inner_iterations)

    # gradient on observed entries is -L * X
    direction = op.apply(step.delta_u, step.delta_v)
    slope = -target.lipschitz * math.fsum(target.x_values * direction)

    d_u, d_v = step.delta_u, step.delta_v

    def trial(alpha: float) -> float:
        cand = f.step(d_u, d_v, alpha)
        return neg_log_lik_theta(predict_on_omega(cand, obs), obs, model)

    if slope >= 0 or not np.any(direction):
        _log.debug("no descent direction, slope=%g", slope)
        alpha, ll_new = 0.0, ll_current
    else:
        alpha, ll_new = armijo_backtrack(trial, ll_current, slope, config.armijo)
    if alpha == 0.0:
        return StepOutcome(factors=f, alpha=0.0, ll_new=ll_current, stalled=True,
                           inner_iterations=step.inner_iterations, converged=step.converged)
    return StepOutcome(factors=f.step(d_u, d_v, alpha), alpha=alpha, ll_new=ll_new,
                       stalled=False, inner_iterations=step.inner_iterations,
                       converged=step.converged)


def solve(obs: ObservationSet, model: LinkModel, config: SolverConfig,
          init: Optional[FactorPair] = None,
          callback: Optional[Callable[[int, StepOutcome], None]] = None) -> SolveReport:
    """Estimate low-rank matrix from 1-bit observations.

    Parameters
    ----------
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observations.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.
    config : `SolverConfig`
        Solver settings.
    init : `~mmgn4py.objective.FactorPair`, optional
        Initial factors, by default made by `initialize`.
    callback : `callable`, optional
        Called after each accepted iteration with iteration number and
        `StepOutcome`.

    Returns
    -------
    report : `SolveReport`
        Fitted factors and iteration trace.
    """
    start = time.perf_counter()
    if init is None:
        factors = initialize(obs, config.rank, config.init, config.seed)
    else:
        factors = init
        if factors.rank != config.rank:
            raise ValueError("Initial factors have rank {0}, expected {1}".format(
                factors.rank, config.rank))
    ll = neg_log_lik(factors, obs, model)
    ll_trace = [ll]
    step_sizes: List[float] = []
    inner_iterations: List[int] = []
    stop_reason = StopReason.MAX_ITER

    for iteration in range(config.max_outer_iter):
        outcome = mmgn_step(factors, obs, model, config)
        if outcome.stalled:
            _log.warning("line search stalled at iteration %d, ll=%g", iteration, ll)
            stop_reason = StopReason.STALLED
            break
        factors = outcome.factors
        ll_trace.append(outcome.ll_new)
        step_sizes.append(outcome.alpha)
        inner_iterations.append(outcome.inner_iterations)
        rel = abs(outcome.ll_new - ll) / abs(ll) if ll != 0 else 0.0
        _log.debug("iteration %d: ll=%.12g alpha=%g rel=%.3g inner=%d",
                   iteration, outcome.ll_new, outcome.alpha, rel, outcome.inner_iterations)
        ll = outcome.ll_new
        if callback is not None:
            callback(iteration, outcome)
        if rel <= config.tol:
            stop_reason = StopReason.TOL_MET
            break

    runtime = time.perf_counter() - start
    _log.info("solve rank=%d: %d iterations, stop=%s, ll=%.10g, %.3f sec",
              config.rank, len(step_sizes), stop_reason.value, ll, runtime)
    return SolveReport(factors=factors, ll_trace=ll_trace, step_sizes=step_sizes,
                       outer_iterations=len(step_sizes), stop_reason=stop_reason,
                       inner_iterations=inner_iterations, runtime_seconds=runtime)


def _choose_rank(per_rank: Sequence[Tuple[int, float]]) -> int:
    """Pick rank with the largest log-likelihood, smaller rank wins ties."""
    best_rank, best_ll = None, -math.inf
    for rank, ll in sorted(per_rank):
        if best_rank is None or ll > best_ll + _TIE_SLACK * (1. + abs(best_ll)):
            best_rank, best_ll = rank, ll
    assert best_rank is not None
    return best_rank


def select_rank(obs: ObservationSet, model: LinkModel, candidates: Sequence[int],
                split_fraction: float = 0.2, seed: int = 0,
                config: Optional[SolverConfig] = None, refit: bool = True,
                jobs: int = 1) -> RankSelection:
    """Select rank by validation likelihood.

    Observations are split into training and validation parts, a model of
    each candidate rank is fitted on the training part, and the rank with
    the largest log-likelihood on the validation part is chosen.

    Parameters
    ----------
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observations.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.
    candidates : `list` [ `int` ]
        Candidate ranks, each at most ``min(m, n)``.
    split_fraction : `float`, optional
        Fraction of observations used for validation.
    seed : `int`, optional
        Seed for the split.
    config : `SolverConfig`, optional
        Solver settings, rank in it is ignored.
    refit : `bool`, optional
        If ``True`` (default) then fit chosen rank on all observations.
    jobs : `int`, optional
        Number of candidate fits to run concurrently.

    Returns
    -------
    selection : `RankSelection`
        Chosen rank, validation log-likelihoods and the refit report.
    """
    candidates = sorted(set(int(r) for r in candidates))
    if not candidates:
        raise ValueError("Candidate rank list is empty")
    if candidates[0] < 1 or candidates[-1] > min(obs.shape):
        raise ValueError("Candidate ranks must be in [1, {0}]".format(min(obs.shape)))
    if config is None:
        config = SolverConfig(rank=candidates[0])

    pair = split(obs, split_fraction, seed)

    def fit(rank: int) -> Tuple[int, float]:
        report = solve(pair.train, model, dataclasses.replace(config, rank=rank))
        ll = -neg_log_lik(report.factors, pair.validation, model)
        _log.debug("candidate rank %d: validation log-likelihood %.10g", rank, ll)
        return rank, ll

    if jobs > 1 and len(candidates) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            per_rank = list(pool.map(fit, candidates))
    else:
        per_rank = [fit(rank) for rank in candidates]

    chosen = _choose_rank(per_rank)
    _log.info("selected rank %d among %s", chosen, candidates)
    report = None
    if refit:
        report = solve(obs, model, dataclasses.replace(config, rank=chosen))
    return RankSelection(chosen_rank=chosen, per_rank_validation_ll=per_rank, report=report)
