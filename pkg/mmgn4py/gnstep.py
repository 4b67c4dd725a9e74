"""Module solving the linearized least-squares problem of a Gauss-Newton step.

For anchor factors ``(U, V)`` the Jacobian of ``(U, V) -> U V^T`` restricted
to observed entries maps a perturbation ``(dU, dV)`` to the values of
``U dV^T + dU V^T`` at observed entries. The least-norm least-squares
solution of ``J(dU, dV) = x`` is computed with LSQR, which never leaves
the row space of ``J`` and therefore needs no regularization to resolve
the ``(U R, -V R^T)`` ambiguity.

Unknowns are flattened as ``vec(dU)`` followed by ``vec(dV)``, both in
column-major order.
"""

__all__ = ['JacobianOperator', 'StepResult', 'solve_min_norm', 'flatten', 'unflatten']

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sp_linalg

from .objective import DimensionError, FactorPair
from .obsdata import ObservationSet

_log = logging.getLogger(__name__)

# LSQR stop codes which mean that the solution satisfies tolerances
_CONVERGED_CODES = (0, 1, 2, 4, 5)


def flatten(delta_u: np.ndarray, delta_v: np.ndarray) -> np.ndarray:
    """Stack ``vec(dU)`` and ``vec(dV)`` into one vector."""
    return np.concatenate((delta_u.ravel(order='F'), delta_v.ravel(order='F')))


def unflatten(vector: np.ndarray, m: int, n: int, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of `flatten`."""
    split = m * r
    return (vector[:split].reshape((m, r), order='F'),
            vector[split:].reshape((n, r), order='F'))


class StepResult(NamedTuple):
    """Solution of the linearized problem.

    Attributes
    ----------
    delta_u : `numpy.ndarray`
        Update of the left factor.
    delta_v : `numpy.ndarray`
        Update of the right factor.
    residual_norm : `float`
        Norm of ``x - J(dU, dV)``.
    inner_iterations : `int`
        Number of LSQR iterations.
    converged : `bool`
        ``False`` if LSQR stopped without meeting its tolerances.
    stop_code : `int`
        LSQR ``istop`` value.
    """
    delta_u: np.ndarray
    delta_v: np.ndarray
    residual_norm: float
    inner_iterations: int
    converged: bool
    stop_code: int


class JacobianOperator:
    """Jacobian of the factorization map at anchor factors, restricted to
    observed entries.

    Parameters
    ----------
    anchor : `~mmgn4py.objective.FactorPair`
        Factors where Jacobian is evaluated.
    obs : `~mmgn4py.obsdata.ObservationSet`
        Observed entries, defines the range of the operator.
    """

    def __init__(self, anchor: FactorPair, obs: ObservationSet):
        if anchor.shape != obs.shape:
            raise DimensionError("Factors shape {0} does not match observations "
                                 "shape {1}".format(anchor.shape, obs.shape))
        self.anchor = anchor
        self.obs = obs
        self._u_rows = anchor.u[obs.rows]
        self._v_cols = anchor.v[obs.cols]
        # selection matrices for scatter-add in the adjoint
        positions = np.arange(obs.size)
        ones = np.ones(obs.size)
        self._row_select = sparse.csr_matrix((ones, (obs.rows, positions)),
                                             shape=(obs.m, obs.size))
        self._col_select = sparse.csr_matrix((ones, (obs.cols, positions)),
                                             shape=(obs.n, obs.size))

    @property
    def domain_size(self) -> int:
        """Number of unknowns, ``(m + n) r`` (`int`)."""
        return (self.obs.m + self.obs.n) * self.anchor.rank

    @property
    def range_size(self) -> int:
        """Number of observed entries (`int`)."""
        return self.obs.size

    def apply(self, delta_u: np.ndarray, delta_v: np.ndarray) -> np.ndarray:
        """Forward map, values of ``U dV^T + dU V^T`` on observed entries.

        Raises
        ------
        DimensionError
            Raised if perturbation shapes differ from anchor shapes.
        """
        if delta_u.shape != self.anchor.u.shape or delta_v.shape != self.anchor.v.shape:
            raise DimensionError("Perturbation shapes {0}, {1} do not match factors".format(
                delta_u.shape, delta_v.shape))
        return (np.einsum('kr,kr->k', self._u_rows, delta_v[self.obs.cols])
                + np.einsum('kr,kr->k', delta_u[self.obs.rows], self._v_cols))

    def apply_adjoint(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Adjoint map.

        Parameters
        ----------
        w : `numpy.ndarray`
            Vector on observed entries.

        Returns
        -------
        delta_u : `numpy.ndarray`
            Row ``i`` is the sum of ``w_ij V_j`` over observed ``(i, j)``.
        delta_v : `numpy.ndarray`
            Row ``j`` is the sum of ``w_ij U_i`` over observed ``(i, j)``.
        """
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.obs.size,):
            raise DimensionError("Expected vector of length {0}, got shape {1}".format(
                self.obs.size, w.shape))
        delta_u = np.asarray(self._row_select @ (w[:, None] * self._v_cols))
        delta_v = np.asarray(self._col_select @ (w[:, None] * self._u_rows))
        return delta_u, delta_v

    def as_linear_operator(self) -> sp_linalg.LinearOperator:
        """Return scipy `~scipy.sparse.linalg.LinearOperator` acting on
        flattened unknowns.
        """
        m, n, r = self.obs.m, self.obs.n, self.anchor.rank

        def matvec(vector):
            delta_u, delta_v = unflatten(np.ravel(vector), m, n, r)
            return self.apply(delta_u, delta_v)

        def rmatvec(w):
            return flatten(*self.apply_adjoint(np.ravel(w)))

        return sp_linalg.LinearOperator((self.range_size, self.domain_size),
                                        matvec=matvec, rmatvec=rmatvec, dtype=np.float64)


def solve_min_norm(op: JacobianOperator, x_values: np.ndarray, tol: float = 1e-6,
                   max_iter: Optional[int] = None) -> StepResult:
    """Compute least-norm solution of ``min ||x - J(dU, dV)||``.

    Parameters
    ----------
    op : `JacobianOperator`
        Linearized operator.
    x_values : `numpy.ndarray`
        Right-hand side on observed entries.
    tol : `float`, optional
        Relative residual and normal-equation tolerance for LSQR.
    max_iter : `int`, optional
        Iteration cap, default is ``min(1000, 2 (m + n) r)``.

    Returns
    -------
    result : `StepResult`
        Best iterate; ``converged`` is ``False`` if the iteration cap was
        hit first.
    """
    if tol <= 0:
        raise ValueError("Inner tolerance must be positive, got {0}".format(tol))
    if max_iter is None:
        max_iter = min(1000, 2 * op.domain_size)
    m, n, r = op.obs.m, op.obs.n, op.anchor.rank
    x_values = np.asarray(x_values, dtype=np.float64)
    if x_values.shape != (op.range_size,):
        raise DimensionError("Expected vector of length {0}, got shape {1}".format(
            op.range_size, x_values.shape))

    sol = sp_linalg.lsqr(op.as_linear_operator(), x_values, atol=tol, btol=tol,
                         iter_lim=max_iter)
    vector, istop, itn, r1norm = sol[0], sol[1], sol[2], sol[3]
    converged = istop in _CONVERGED_CODES
    if not converged:
        _log.debug("LSQR stopped with istop=%d after %d iterations, residual %g",
                   istop, itn, r1norm)
    delta_u, delta_v = unflatten(vector, m, n, r)
    return StepResult(delta_u=delta_u, delta_v=delta_v, residual_norm=float(r1norm),
                      inner_iterations=int(itn), converged=converged, stop_code=int(istop))
