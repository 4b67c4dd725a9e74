"""Module generating synthetic ground truth and 1-bit observations.

Ground truth matrices are exact rank-``r*`` products of random factors,
either bounded uniform factors rescaled to unit maximum entry (non-spiky)
or heavy-tailed Student t factors (spiky). Observed cells are sampled
uniformly without replacement and labels are drawn from the link model.
"""

__all__ = ['TruthKind', 'GroundTruth', 'OmegaSample', 'gen_nonspiky', 'gen_spiky',
           'make_truth', 'sample_omega', 'sample_labels', 'write_truth', 'read_truth']

import dataclasses
import enum
import logging
import math
from typing import NamedTuple, Optional

import numpy as np

from . import linkfun
from .detail import io
from .linkfun import LinkModel
from .metrics import spikiness
from .obsdata import ObservationSet

_log = logging.getLogger(__name__)


@enum.unique
class TruthKind(enum.Enum):
    """Namespace for constants defining ground truth generators.
    """

    NONSPIKY = "nonspiky"
    """Uniform factors on [-0.5, 0.5], scaled to unit max-norm."""

    SPIKY = "spiky"
    """Student t factors with ``nu`` degrees of freedom, not rescaled."""


@dataclasses.dataclass
class GroundTruth:
    """Dense ground truth matrix with its generating factors.

    Attributes
    ----------
    theta_star : `numpy.ndarray`
        Matrix ``m x n``.
    rank_star : `int` or ``None``
        Rank of the matrix, ``None`` if not known.
    spikiness : `float`
        Spikiness ratio of ``theta_star``.
    u_star : `numpy.ndarray` or ``None``
        Left factor, ``theta_star = u_star @ v_star.T``.
    v_star : `numpy.ndarray` or ``None``
        Right factor.
    """
    theta_star: np.ndarray
    rank_star: Optional[int]
    spikiness: float
    u_star: Optional[np.ndarray] = None
    v_star: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.theta_star.shape


class OmegaSample(NamedTuple):
    """Set of observed cells, sorted in column-major order.

    Attributes
    ----------
    m : `int`
    n : `int`
    rows : `numpy.ndarray`
        0-based row indices.
    cols : `numpy.ndarray`
        0-based column indices.
    """
    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray

    @property
    def size(self) -> int:
        return self.rows.size


def _check_dims(m: int, n: int, r_star: int) -> None:
    if m < 1 or n < 1:
        raise ValueError("Matrix dimensions must be positive: {0}x{1}".format(m, n))
    if not 1 <= r_star <= min(m, n):
        raise ValueError("Rank {0} out of range [1, {1}]".format(r_star, min(m, n)))


def _truth(u: np.ndarray, v: np.ndarray) -> GroundTruth:
    theta = u @ v.T
    return GroundTruth(theta_star=theta, rank_star=u.shape[1], spikiness=spikiness(theta),
                       u_star=u, v_star=v)


def gen_nonspiky(m: int, n: int, r_star: int, seed: int) -> GroundTruth:
    """Generate non-spiky ground truth.

    Factor entries are i.i.d. uniform on [-0.5, 0.5]; the product is
    scaled so that its largest absolute entry is exactly 1.

    Parameters
    ----------
    m, n : `int`
        Matrix dimensions.
    r_star : `int`
        Rank, ``1 <= r_star <= min(m, n)``.
    seed : `int`
        Seed for random generator.

    Returns
    -------
    truth : `GroundTruth`
        Generated matrix.
    """
    _check_dims(m, n, r_star)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 0.5, size=(m, r_star))
    v = rng.uniform(-0.5, 0.5, size=(n, r_star))
    scale = np.max(np.abs(u @ v.T))
    if scale == 0:
        raise ValueError("Generated matrix is zero")
    truth = _truth(u / scale, v)
    # rescaled product may differ from 1 in the last bit
    truth.theta_star /= np.max(np.abs(truth.theta_star))
    _log.debug("non-spiky truth %dx%d rank %d, spikiness %.4f", m, n, r_star, truth.spikiness)
    return truth


def gen_spiky(m: int, n: int, r_star: int, nu: float, seed: int) -> GroundTruth:
    """Generate spiky ground truth with Student t factors.

    Parameters
    ----------
    m, n : `int`
        Matrix dimensions.
    r_star : `int`
        Rank, ``1 <= r_star <= min(m, n)``.
    nu : `float`
        Degrees of freedom, must be larger than 2.
    seed : `int`
        Seed for random generator.

    Returns
    -------
    truth : `GroundTruth`
        Generated matrix, not rescaled.

    Raises
    ------
    ValueError
        Raised if ``nu <= 2``.

    Notes
    -----
    Each t variate is built as ``Z / sqrt(W / nu)`` with standard normal
    ``Z`` and chi-square ``W`` drawn from the same generator.
    """
    _check_dims(m, n, r_star)
    if not nu > 2:
        raise ValueError("Degrees of freedom must be larger than 2, got {0}".format(nu))
    rng = np.random.default_rng(seed)

    def student(shape):
        z = rng.standard_normal(shape)
        w = rng.chisquare(nu, size=shape)
        return z / np.sqrt(w / nu)

    u = student((m, r_star))
    v = student((n, r_star))
    truth = _truth(u, v)
    _log.debug("spiky truth %dx%d rank %d nu=%g, spikiness %.4f", m, n, r_star, nu,
               truth.spikiness)
    return truth


def make_truth(kind: TruthKind, m: int, n: int, r_star: int, seed: int,
               nu: Optional[float] = None) -> GroundTruth:
    """Dispatch to `gen_nonspiky` or `gen_spiky`.

    Raises
    ------
    ValueError
        Raised if ``nu`` is missing for spiky kind.
    """
    kind = TruthKind(kind)
    if kind is TruthKind.NONSPIKY:
        return gen_nonspiky(m, n, r_star, seed)
    if nu is None:
        raise ValueError("Spiky ground truth needs degrees of freedom")
    return gen_spiky(m, n, r_star, nu, seed)


def sample_omega(m: int, n: int, rho: float, seed: int) -> OmegaSample:
    """Sample observed cells uniformly without replacement.

    Parameters
    ----------
    m, n : `int`
        Matrix dimensions.
    rho : `float`
        Fraction of observed cells, in (0, 1].
    seed : `int`
        Seed for random generator.

    Returns
    -------
    omega : `OmegaSample`
        ``round(rho * m * n)`` cells, all cells if ``rho == 1``.
    """
    if not 0 < rho <= 1:
        raise ValueError("Observed fraction must be in (0, 1], got {0}".format(rho))
    total = m * n
    k = min(total, int(math.floor(rho * total + 0.5)))
    if k == total:
        linear = np.arange(total, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        linear = np.sort(rng.choice(total, size=k, replace=False)).astype(np.int64)
    # column-major linear index
    return OmegaSample(m=m, n=n, rows=linear % m, cols=linear // m)


def sample_labels(truth: GroundTruth, omega: OmegaSample, model: LinkModel,
                  seed: int) -> ObservationSet:
    """Draw labels for observed cells.

    Label of cell ``(i, j)`` is +1 with probability ``cdf(theta*_ij)`` and
    -1 otherwise, independently of other cells.

    Parameters
    ----------
    truth : `GroundTruth`
        Ground truth matrix.
    omega : `OmegaSample`
        Observed cells.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.
    seed : `int`
        Seed for random generator.

    Returns
    -------
    obs : `~mmgn4py.obsdata.ObservationSet`
        Labelled observations.
    """
    if truth.shape != (omega.m, omega.n):
        raise ValueError("Ground truth shape {0} does not match sample shape {1}".format(
            truth.shape, (omega.m, omega.n)))
    rng = np.random.default_rng(seed)
    prob = np.atleast_1d(linkfun.cdf(model, truth.theta_star[omega.rows, omega.cols]))
    labels = np.where(rng.random(omega.size) < prob, 1, -1)
    return ObservationSet.from_arrays(omega.m, omega.n, omega.rows, omega.cols, labels)


def write_truth(truth: GroundTruth, path: str) -> None:
    """Write ground truth matrix, CSV if file name ends with ``.csv``
    otherwise binary format.
    """
    if path.lower().endswith(".csv"):
        io.write_dense_csv(truth.theta_star, path)
    else:
        io.write_dense(truth.theta_star, path)


def read_truth(path: str, rank_star: Optional[int] = None, compute_rank: bool = True) -> GroundTruth:
    """Read ground truth matrix written by `write_truth`.

    Parameters
    ----------
    path : `str`
        File name.
    rank_star : `int`, optional
        Known rank; if not given it is computed numerically.
    compute_rank : `bool`, optional
        If ``False`` and ``rank_star`` is not given then rank is left as
        ``None``, numerical rank needs a full SVD of the matrix.

    Returns
    -------
    truth : `GroundTruth`
        Matrix without generating factors.
    """
    if path.lower().endswith(".csv"):
        theta = io.read_dense_csv(path)
    else:
        theta = io.read_dense(path)
    if rank_star is None and compute_rank:
        rank_star = int(np.linalg.matrix_rank(theta))
    return GroundTruth(theta_star=theta, rank_star=rank_star, spikiness=spikiness(theta))
