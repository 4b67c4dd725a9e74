"""Module constructing the quadratic majorization of the negative
log-likelihood.

At anchor factors the surrogate is

    g(Theta | anchor) = (L/2) ||Theta - anchor - X||^2 + c

summed over observed entries, where ``X`` is built by `build_target` and
the constant ``c`` makes the surrogate touch the likelihood at the anchor.
"""

__all__ = ['MMTarget', 'build_target', 'surrogate_value']

import math
from typing import NamedTuple

import numpy as np

from . import linkfun
from .linkfun import LinkModel
from .objective import FactorPair, neg_log_lik_theta, predict_on_omega
from .obsdata import ObservationSet


class MMTarget(NamedTuple):
    """Majorization at an anchor point.

    Attributes
    ----------
    x_values : `numpy.ndarray`
        Target shift for each observed entry.
    anchor_ll : `float`
        Negative log-likelihood at the anchor.
    lipschitz : `float`
        Curvature of the quadratic surrogate.
    """
    x_values: np.ndarray
    anchor_ll: float
    lipschitz: float


def build_target(f: FactorPair, obs: ObservationSet, model: LinkModel) -> MMTarget:
    """Construct majorization target at given factors.

    Parameters
    ----------
    f : `~mmgn4py.objective.FactorPair`
        Anchor factors.
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observed entries.
    model : `~mmgn4py.linkfun.LinkModel`
        Link model.

    Returns
    -------
    target : `MMTarget`
        Target values, likelihood at anchor and Lipschitz constant.
    """
    theta = predict_on_omega(f, obs)
    x_values = np.atleast_1d(linkfun.mm_ratio(model, obs.labels, theta))
    return MMTarget(x_values=x_values,
                    anchor_ll=neg_log_lik_theta(theta, obs, model),
                    lipschitz=linkfun.lipschitz(model))


def surrogate_value(target: MMTarget, candidate: FactorPair, anchor: FactorPair,
                    obs: ObservationSet) -> float:
    """Evaluate surrogate at candidate factors.

    Parameters
    ----------
    target : `MMTarget`
        Majorization built at ``anchor``.
    candidate : `~mmgn4py.objective.FactorPair`
        Point where surrogate is evaluated.
    anchor : `~mmgn4py.objective.FactorPair`
        Anchor factors used to build ``target``.
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observed entries.

    Returns
    -------
    value : `float`
        Surrogate value, equal to ``target.anchor_ll`` when ``candidate``
        and ``anchor`` coincide.
    """
    diff = predict_on_omega(candidate, obs) - predict_on_omega(anchor, obs)
    # (d - x)^2 - x^2 written so that d == 0 gives exact zeros
    excess = diff * (diff - 2. * target.x_values)
    return target.anchor_ll + 0.5 * target.lipschitz * math.fsum(excess)
