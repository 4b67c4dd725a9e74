"""Module with evaluation metrics.

Metrics comparing an estimate ``U V^T`` with a dense ground truth are
computed over blocks of columns, so that at most one block of the dense
estimate exists at any time. Blocks are reduced in a fixed order, results
do not depend on block scheduling.
"""

__all__ = ['EvalReport', 'GroupRow', 'SignAccuracy', 'relative_error', 'hellinger_distance',
           'hellinger_from_factors', 'probabilities', 'spikiness', 'sign_accuracy',
           'group_breakdown', 'storage_numbers', 'evaluate']

import dataclasses
import math
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import linkfun
from .linkfun import LinkModel
from .objective import DimensionError, FactorPair, predict_on_omega
from .obsdata import ObservationSet

# number of dense matrix elements in one column block
_BLOCK_ELEMENTS = 1 << 20


class GroupRow(NamedTuple):
    """Metrics for one value group.

    Attributes
    ----------
    value_low, value_high : `float`
        Value range ``(value_low, value_high]`` of ground truth entries.
    prob_low, prob_high : `float`
        Same range mapped through link CDF.
    count : `int`
        Number of entries in the group.
    sq_error : `float`
        Sum of squared errors in the group.
    relative_error : `float` or ``None``
        Squared error divided by squared norm of ground truth in the group,
        ``None`` if group norm is zero.
    hellinger : `float` or ``None``
        Mean squared Hellinger distance in the group, ``None`` for empty
        group.
    """
    value_low: float
    value_high: float
    prob_low: float
    prob_high: float
    count: int
    sq_error: float
    relative_error: Optional[float]
    hellinger: Optional[float]


class SignAccuracy(NamedTuple):
    """Result of sign prediction check.

    Attributes
    ----------
    overall : `float`
        Fraction of correctly predicted labels.
    by_rating : `dict` or ``None``
        Accuracy for each original rating value, if ratings were given.
    """
    overall: float
    by_rating: Optional[Dict[float, float]]


@dataclasses.dataclass
class EvalReport:
    """Summary of estimate quality.

    Attributes
    ----------
    relative_error : `float`
    hellinger : `float`
    runtime_seconds : `float`
    per_group : `list` [ `GroupRow` ] or ``None``
    """
    relative_error: float
    hellinger: float
    runtime_seconds: float = 0.0
    per_group: Optional[List[GroupRow]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Return flat JSON-compatible dictionary."""
        result: Dict[str, Any] = dict(relative_error=self.relative_error,
                                      hellinger=self.hellinger,
                                      runtime_seconds=self.runtime_seconds)
        if self.per_group is not None:
            result["per_group"] = [_json_row(row._asdict()) for row in self.per_group]
        return result


def _json_row(row: Dict[str, Any]) -> Dict[str, Any]:
    # JSON has no infinities
    return {key: (None if isinstance(val, float) and math.isinf(val) else val)
            for key, val in row.items()}


def _truth_matrix(truth: Any) -> np.ndarray:
    return np.asarray(getattr(truth, "theta_star", truth), dtype=np.float64)


def _column_blocks(m: int, n: int) -> Iterator[slice]:
    step = max(1, _BLOCK_ELEMENTS // max(m, 1))
    for start in range(0, n, step):
        yield slice(start, min(start + step, n))


def _check_estimate(estimate: FactorPair, theta: np.ndarray) -> None:
    if estimate.shape != theta.shape:
        raise DimensionError("Estimate shape {0} does not match ground truth shape {1}".format(
            estimate.shape, theta.shape))


def _pair_blocks(estimate: FactorPair, theta: np.ndarray) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    for cols in _column_blocks(*theta.shape):
        yield estimate.u @ estimate.v[cols].T, theta[:, cols]


def relative_error(estimate: FactorPair, truth: Any) -> float:
    """Squared Frobenius error relative to squared norm of ground truth.

    Parameters
    ----------
    estimate : `~mmgn4py.objective.FactorPair`
        Estimated factors.
    truth : `~mmgn4py.synth.GroundTruth` or `numpy.ndarray`
        Ground truth.

    Returns
    -------
    error : `float`
        ``||U V^T - Theta*||_F^2 / ||Theta*||_F^2``.

    Raises
    ------
    ValueError
        Raised if ground truth is zero.
    """
    theta = _truth_matrix(truth)
    _check_estimate(estimate, theta)
    num, den = [], []
    for est, ref in _pair_blocks(estimate, theta):
        num.append(float(np.sum((est - ref) ** 2)))
        den.append(float(np.sum(ref ** 2)))
    denom = math.fsum(den)
    if denom == 0:
        raise ValueError("Relative error is undefined for zero ground truth")
    return math.fsum(num) / denom


def _hellinger_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return (np.sqrt(p) - np.sqrt(q)) ** 2 + (np.sqrt(1. - p) - np.sqrt(1. - q)) ** 2


def hellinger_distance(p_est: np.ndarray, p_true: np.ndarray) -> float:
    """Mean squared Hellinger distance between probability matrices.

    Parameters
    ----------
    p_est, p_true : `numpy.ndarray`
        Matrices of the same shape with entries in [0, 1].

    Returns
    -------
    distance : `float`
        Value in [0, 2], zero only for identical matrices.

    Raises
    ------
    ValueError
        Raised for entries outside of [0, 1] or for mismatched shapes.
    """
    p = np.asarray(p_est, dtype=np.float64)
    q = np.asarray(p_true, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError("Shapes {0} and {1} differ".format(p.shape, q.shape))
    for arr in (p, q):
        if not np.all((arr >= 0) & (arr <= 1)):
            raise ValueError("Probabilities must be in [0, 1]")
    if p.size == 0:
        raise ValueError("Hellinger distance of empty matrices is undefined")
    # sum of the two terms is symmetric in p and q
    return math.fsum(_hellinger_terms(p, q).ravel()) / p.size


def probabilities(estimate: FactorPair, model: LinkModel) -> np.ndarray:
    """Dense matrix of ``cdf(U V^T)``, meant for small problems."""
    return np.asarray(linkfun.cdf(model, estimate.dense()))


def hellinger_from_factors(estimate: FactorPair, truth: Any, model: LinkModel) -> float:
    """Mean squared Hellinger distance between ``cdf(U V^T)`` and
    ``cdf(Theta*)``, computed over column blocks.
    """
    theta = _truth_matrix(truth)
    _check_estimate(estimate, theta)
    sums = []
    for est, ref in _pair_blocks(estimate, theta):
        terms = _hellinger_terms(np.asarray(linkfun.cdf(model, est)),
                                 np.asarray(linkfun.cdf(model, ref)))
        sums.append(math.fsum(terms.ravel()))
    return math.fsum(sums) / theta.size


def spikiness(theta: np.ndarray) -> float:
    """Spikiness ratio ``sqrt(m n) max|theta| / ||theta||_F``.

    Raises
    ------
    ValueError
        Raised for zero matrix.
    """
    theta = np.asarray(theta, dtype=np.float64)
    norm = np.linalg.norm(theta)
    if norm == 0:
        raise ValueError("Spikiness of zero matrix is undefined")
    return math.sqrt(theta.size) * float(np.max(np.abs(theta))) / float(norm)


def sign_accuracy(estimate: FactorPair, heldout: ObservationSet,
                  ratings: Optional[np.ndarray] = None) -> SignAccuracy:
    """Fraction of held-out labels matching sign of the estimate.

    Parameters
    ----------
    estimate : `~mmgn4py.objective.FactorPair`
        Estimated factors.
    heldout : `~mmgn4py.obsdata.ObservationSet`
        Held-out observations, non-empty.
    ratings : `numpy.ndarray`, optional
        Original ratings aligned with ``heldout`` entries.

    Returns
    -------
    accuracy : `SignAccuracy`
        Overall accuracy and per-rating accuracy if ``ratings`` is given.

    Notes
    -----
    Sign of zero is taken as +1.
    """
    if heldout.size == 0:
        raise ValueError("Held-out set is empty")
    theta = predict_on_omega(estimate, heldout)
    correct = np.where(theta >= 0, 1, -1) == heldout.labels
    overall = float(np.count_nonzero(correct)) / correct.size
    by_rating = None
    if ratings is not None:
        ratings = np.asarray(ratings, dtype=np.float64)
        if ratings.shape != correct.shape:
            raise DimensionError("Ratings are not aligned with held-out entries")
        by_rating = {}
        for value in np.unique(ratings[~np.isnan(ratings)]):
            mask = ratings == value
            by_rating[float(value)] = float(np.count_nonzero(correct[mask])) / np.count_nonzero(mask)
    return SignAccuracy(overall=overall, by_rating=by_rating)


def _edge_prob(model: LinkModel, edge: float) -> float:
    if edge == -math.inf:
        return 0.0
    if edge == math.inf:
        return 1.0
    return float(linkfun.cdf(model, edge))


def group_breakdown(estimate: FactorPair, truth: Any, model: LinkModel,
                    value_edges: Sequence[float]) -> List[GroupRow]:
    """Metrics split by value range of ground truth entries.

    Parameters
    ----------
    estimate : `~mmgn4py.objective.FactorPair`
        Estimated factors.
    truth : `~mmgn4py.synth.GroundTruth` or `numpy.ndarray`
        Ground truth.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model for probabilities.
    value_edges : `list` [ `float` ]
        Strictly increasing finite edges; ``k`` edges make ``k + 1``
        right-closed groups ``(-inf, e0], (e0, e1], ..., (e_k-1, inf)``.

    Returns
    -------
    rows : `list` [ `GroupRow` ]
        One row per group.

    Raises
    ------
    ValueError
        Raised if edges are not strictly increasing or not finite.
    """
    edges = np.asarray(value_edges, dtype=np.float64).ravel()
    if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
        raise ValueError("Group edges must be finite and strictly increasing")
    theta = _truth_matrix(truth)
    _check_estimate(estimate, theta)
    nbins = edges.size + 1

    counts = np.zeros(nbins, dtype=np.int64)
    sq_err = [[] for _ in range(nbins)]
    sq_ref = [[] for _ in range(nbins)]
    hell = [[] for _ in range(nbins)]
    for est, ref in _pair_blocks(estimate, theta):
        if edges.size:
            bins = np.digitize(ref, edges, right=True).ravel()
        else:
            bins = np.zeros(ref.size, dtype=np.intp)
        err = ((est - ref) ** 2).ravel()
        terms = _hellinger_terms(np.asarray(linkfun.cdf(model, est)),
                                 np.asarray(linkfun.cdf(model, ref))).ravel()
        refsq = (ref ** 2).ravel()
        counts += np.bincount(bins, minlength=nbins)
        for k, total in enumerate(np.bincount(bins, weights=err, minlength=nbins)):
            sq_err[k].append(total)
        for k, total in enumerate(np.bincount(bins, weights=refsq, minlength=nbins)):
            sq_ref[k].append(total)
        for k, total in enumerate(np.bincount(bins, weights=terms, minlength=nbins)):
            hell[k].append(total)

    bounds = [-math.inf] + edges.tolist() + [math.inf]
    rows = []
    for k in range(nbins):
        numerator = math.fsum(sq_err[k])
        denom = math.fsum(sq_ref[k])
        count = int(counts[k])
        rows.append(GroupRow(value_low=bounds[k], value_high=bounds[k + 1],
                             prob_low=_edge_prob(model, bounds[k]),
                             prob_high=_edge_prob(model, bounds[k + 1]),
                             count=count, sq_error=numerator,
                             relative_error=numerator / denom if denom > 0 else None,
                             hellinger=math.fsum(hell[k]) / count if count else None))
    return rows


def storage_numbers(obs: ObservationSet, r: int) -> int:
    """Numbers stored by the solver: observed triplets plus factors,
    ``3 |Omega| + (m + n) r``.
    """
    return obs.storage_cost() + (obs.m + obs.n) * r


def evaluate(estimate: FactorPair, truth: Any, model: LinkModel, runtime_seconds: float = 0.0,
             value_edges: Optional[Sequence[float]] = None) -> EvalReport:
    """Compute `EvalReport` for an estimate and ground truth.

    Parameters
    ----------
    estimate : `~mmgn4py.objective.FactorPair`
        Estimated factors.
    truth : `~mmgn4py.synth.GroundTruth` or `numpy.ndarray`
        Ground truth.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.
    runtime_seconds : `float`, optional
        Solver runtime to record.
    value_edges : `list` [ `float` ], optional
        If given then per-group metrics are included.
    """
    per_group = None
    if value_edges is not None:
        per_group = group_breakdown(estimate, truth, model, value_edges)
    return EvalReport(relative_error=relative_error(estimate, truth),
                      hellinger=hellinger_from_factors(estimate, truth, model),
                      runtime_seconds=runtime_seconds, per_group=per_group)
