"""Module with link models for 1-bit observations.

A link model is a known CDF :math:`\\Phi` which maps a real matrix entry to
the probability of observing ``+1``. Two families are supported, probit
(Gaussian CDF) and logistic, both with a noise scale ``sigma``. All
kernels in this module are vectorized, they accept scalars or numpy arrays
and return Python floats for scalar input.
"""

__all__ = ['LinkKind', 'LinkModel', 'LinkDomainError', 'cdf', 'pdf',
           'log_cdf', 'dlog_cdf', 'mm_ratio', 'lipschitz']

import dataclasses
import enum
import math
from typing import Any

import numpy as np
from scipy import special

# standardized argument beyond which asymptotic series replace erfcx
_TAIL = 40.0

_SQRT2 = math.sqrt(2.)
_SQRT_2_OVER_PI = math.sqrt(2. / math.pi)
_INV_SQRT_2PI = 1. / math.sqrt(2. * math.pi)


class LinkDomainError(ValueError):
    """Class for exceptions raised for arguments outside of the domain of
    link functions, e.g. non-finite values or labels other than +1/-1.
    """
    pass


@enum.unique
class LinkKind(enum.Enum):
    """Namespace for constants defining supported link families.
    """

    PROBIT = "probit"
    """Gaussian CDF with scale ``sigma``."""

    LOGISTIC = "logistic"
    """Logistic CDF ``1/(1 + exp(-x/sigma))``."""


@dataclasses.dataclass(frozen=True)
class LinkModel:
    """Link model, a CDF family and its noise scale.

    Parameters
    ----------
    kind : `LinkKind` or `str`
        Link family, strings "probit" and "logistic" are accepted too.
    sigma : `float`
        Noise scale, must be positive.
    """

    kind: LinkKind
    sigma: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, LinkKind):
            try:
                object.__setattr__(self, "kind", LinkKind(self.kind))
            except ValueError:
                raise ValueError("Unknown link model '{0}'".format(self.kind))
        sigma = float(self.sigma)
        if not (math.isfinite(sigma) and sigma > 0):
            raise ValueError("Link noise scale must be positive, "
                             "got {0}".format(self.sigma))
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def probit(cls, sigma: float = 1.0) -> 'LinkModel':
        """Make probit model with given scale."""
        return cls(LinkKind.PROBIT, sigma)

    @classmethod
    def logistic(cls, sigma: float = 1.0) -> 'LinkModel':
        """Make logistic model with given scale."""
        return cls(LinkKind.LOGISTIC, sigma)

    def __str__(self) -> str:
        return "{0}(sigma={1:g})".format(self.kind.value, self.sigma)


def _as_array(x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise LinkDomainError("Link functions require finite arguments")
    return arr


def _as_labels(y: Any) -> np.ndarray:
    arr = np.asarray(y)
    if not np.all((arr == 1) | (arr == -1)):
        raise LinkDomainError("Labels must be +1 or -1")
    return arr.astype(np.float64)


def _result(value: np.ndarray) -> Any:
    if value.ndim == 0:
        return float(value)
    return value


def _probit_log_cdf(z: np.ndarray) -> np.ndarray:
    """log Phi(z) for standard normal, erfcx form on the left half-line."""
    out = np.empty_like(z)
    left = z < 0
    t = -z[left] / _SQRT2
    out[left] = np.log(0.5 * special.erfcx(t)) - t * t
    out[~left] = np.log1p(-special.ndtr(-z[~left]))
    return out


def _probit_hazard(u: np.ndarray) -> np.ndarray:
    """phi(u)/Phi(u) for standard normal (inverse Mills ratio of -u)."""
    out = np.empty_like(u)
    right = u >= 0
    ur = u[right]
    out[right] = _INV_SQRT_2PI * np.exp(-0.5 * ur * ur) / special.ndtr(ur)
    mid = (~right) & (u >= -_TAIL)
    out[mid] = _SQRT_2_OVER_PI / special.erfcx(-u[mid] / _SQRT2)
    far = u < -_TAIL
    x = -u[far]
    x2 = 1. / (x * x)
    out[far] = x / (1. - x2 * (1. - x2 * (3. - 15. * x2)))
    return out


def cdf(model: LinkModel, x: Any) -> Any:
    """Evaluate CDF of the link model.

    Parameters
    ----------
    model : `LinkModel`
        Link model.
    x : `float` or `numpy.ndarray`
        Arguments, must be finite.

    Returns
    -------
    value : `float` or `numpy.ndarray`
        Probabilities in [0, 1].

    Raises
    ------
    LinkDomainError
        Raised for non-finite arguments.
    """
    z = _as_array(x) / model.sigma
    if model.kind is LinkKind.PROBIT:
        return _result(special.ndtr(z))
    return _result(special.expit(z))


def pdf(model: LinkModel, x: Any) -> Any:
    """Evaluate density of the link model, derivative of `cdf`.
    """
    z = _as_array(x) / model.sigma
    if model.kind is LinkKind.PROBIT:
        dens = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    else:
        dens = special.expit(z) * special.expit(-z)
    return _result(dens / model.sigma)


def log_cdf(model: LinkModel, x: Any) -> Any:
    """Evaluate logarithm of the link CDF without underflow.

    Probit uses the scaled complementary error function in the left tail,
    logistic uses ``log_expit``.
    """
    z = np.atleast_1d(_as_array(x) / model.sigma)
    if model.kind is LinkKind.PROBIT:
        value = _probit_log_cdf(z)
    else:
        value = special.log_expit(z)
    return _result(value.reshape(np.shape(x)))


def dlog_cdf(model: LinkModel, x: Any) -> Any:
    """Derivative of `log_cdf`, i.e. ``pdf(x)/cdf(x)``.
    """
    z = np.atleast_1d(_as_array(x) / model.sigma)
    if model.kind is LinkKind.PROBIT:
        value = _probit_hazard(z)
    else:
        value = special.expit(-z)
    return _result((value / model.sigma).reshape(np.shape(x)))


def mm_ratio(model: LinkModel, y: Any, theta: Any) -> Any:
    """Entries of the majorization target, ``y * pdf(theta) / cdf(y * theta) / L``.

    Parameters
    ----------
    model : `LinkModel`
        Link model.
    y : `int` or `numpy.ndarray`
        Labels, +1 or -1, broadcastable with ``theta``.
    theta : `float` or `numpy.ndarray`
        Current values of the matrix entries.

    Returns
    -------
    ratio : `float` or `numpy.ndarray`
        Shift of each entry towards the surrogate target.

    Notes
    -----
    Because the density is symmetric, ``pdf(theta) == pdf(y * theta)`` and
    the ratio depends only on ``u = y * theta / sigma``. For logistic model
    it reduces to ``4 * sigma * y * cdf(-y * theta)``; for probit model it
    is ``sigma * y * phi(u) / Phi(u)`` with the hazard evaluated through
    ``erfcx`` and its asymptotic series beyond the far-left clamp.
    """
    labels = _as_labels(y)
    theta = _as_array(theta)
    u = np.atleast_1d(labels * theta / model.sigma)
    if model.kind is LinkKind.PROBIT:
        value = model.sigma * _probit_hazard(u)
    else:
        value = 4. * model.sigma * special.expit(-u)
    shape = np.broadcast(labels, theta).shape
    return _result(np.broadcast_to(labels, shape) * value.reshape(shape))


def lipschitz(model: LinkModel) -> float:
    """Lipschitz constant of the derivative of log CDF.

    Returns
    -------
    L : `float`
        ``1/sigma**2`` for probit and ``1/(4 sigma**2)`` for logistic.
    """
    if model.kind is LinkKind.PROBIT:
        return 1. / model.sigma ** 2
    return 0.25 / model.sigma ** 2
