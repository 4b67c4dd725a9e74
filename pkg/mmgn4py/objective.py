"""Module with the negative log-likelihood of 1-bit observations.

All quantities are evaluated on the observed entries only, the dense
``m x n`` matrix ``U V^T`` is never formed.
"""

__all__ = ['FactorPair', 'DimensionError', 'predict_on_omega', 'neg_log_lik',
           'neg_log_lik_theta', 'log_lik', 'grad_neg_log_lik', 'factor_gradient']

import math
from typing import Tuple

import numpy as np
from scipy import sparse

from . import linkfun
from .linkfun import LinkModel
from .obsdata import ObservationSet


class DimensionError(ValueError):
    """Class for exceptions raised when shapes of factors and observations
    do not agree.
    """
    pass


class FactorPair:
    """Rank-r factorization ``Theta = U V^T``.

    Parameters
    ----------
    u : `numpy.ndarray`
        Left factor, ``m x r``.
    v : `numpy.ndarray`
        Right factor, ``n x r``.

    Raises
    ------
    DimensionError
        Raised if factors are not 2-dimensional or have different number
        of columns.
    ValueError
        Raised if factors have non-finite entries.
    """

    def __init__(self, u: np.ndarray, v: np.ndarray):
        u = np.array(u, dtype=np.float64, ndmin=2)
        v = np.array(v, dtype=np.float64, ndmin=2)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
            raise DimensionError("Incompatible factor shapes {0} and {1}".format(u.shape, v.shape))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("Factor matrices must be finite")
        self.u = u
        self.v = v

    @property
    def m(self) -> int:
        return self.u.shape[0]

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def rank(self) -> int:
        """Number of columns in factors (`int`)."""
        return self.u.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.m, self.n)

    def dense(self) -> np.ndarray:
        """Return ``U V^T`` as dense matrix, meant for small problems."""
        return self.u @ self.v.T

    def step(self, delta_u: np.ndarray, delta_v: np.ndarray, alpha: float) -> 'FactorPair':
        """Return new pair ``(U + alpha dU, V + alpha dV)``."""
        return FactorPair(self.u + alpha * delta_u, self.v + alpha * delta_v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactorPair):
            return NotImplemented
        return np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)

    __hash__ = None  # type: ignore

    def __repr__(self) -> str:
        return "FactorPair(m={0}, n={1}, rank={2})".format(self.m, self.n, self.rank)


def _check_shapes(f: FactorPair, obs: ObservationSet) -> None:
    if f.shape != obs.shape:
        raise DimensionError("Factors shape {0} does not match observations "
                             "shape {1}".format(f.shape, obs.shape))


def predict_on_omega(f: FactorPair, obs: ObservationSet) -> np.ndarray:
    """Values of ``U V^T`` at observed entries.

    Parameters
    ----------
    f : `FactorPair`
        Factors.
    obs : `ObservationSet`
        Observed entries.

    Returns
    -------
    theta : `numpy.ndarray`
        Vector of length |Omega|, ordered as ``obs`` entries.
    """
    _check_shapes(f, obs)
    return np.einsum('kr,kr->k', f.u[obs.rows], f.v[obs.cols])


def neg_log_lik_theta(theta: np.ndarray, obs: ObservationSet, model: LinkModel) -> float:
    """Negative log-likelihood for given values of observed entries.

    Uses ``-sum(log Phi(y * theta))``, which is equivalent to the two-branch
    form for symmetric densities. Summation is exactly rounded.
    """
    terms = linkfun.log_cdf(model, obs.labels * np.asarray(theta))
    return -math.fsum(np.atleast_1d(terms))


def neg_log_lik(f: FactorPair, obs: ObservationSet, model: LinkModel) -> float:
    """Negative log-likelihood of observations for given factors.

    Parameters
    ----------
    f : `FactorPair`
        Factors.
    obs : `ObservationSet`
        Observed entries.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.

    Returns
    -------
    nll : `float`
        Non-negative value, zero for empty observation set.
    """
    return neg_log_lik_theta(predict_on_omega(f, obs), obs, model)


def log_lik(f: FactorPair, obs: ObservationSet, model: LinkModel) -> float:
    """Log-likelihood, negative of `neg_log_lik`."""
    return -neg_log_lik(f, obs, model)


def grad_neg_log_lik(f: FactorPair, obs: ObservationSet, model: LinkModel) -> np.ndarray:
    """Gradient of negative log-likelihood with respect to observed entries.

    Returns
    -------
    grad : `numpy.ndarray`
        Vector of length |Omega|, ``-y * pdf(theta) / cdf(y * theta)`` for
        each observed entry; gradient is zero outside of observed set.
    """
    theta = predict_on_omega(f, obs)
    return -linkfun.lipschitz(model) * np.atleast_1d(linkfun.mm_ratio(model, obs.labels, theta))


def factor_gradient(f: FactorPair, obs: ObservationSet,
                    model: LinkModel) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of negative log-likelihood with respect to factors.

    Returns
    -------
    grad_u : `numpy.ndarray`
        ``G V`` where ``G`` is the sparse entry gradient.
    grad_v : `numpy.ndarray`
        ``G^T U``.
    """
    grad = grad_neg_log_lik(f, obs, model)
    g = sparse.csc_matrix((grad, obs.rows, obs.col_ptr), shape=obs.shape)
    return g @ f.v, g.T @ f.u
