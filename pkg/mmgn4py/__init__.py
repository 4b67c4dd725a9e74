# -*- coding: utf-8 -*-

"""Top-level package for 1-bit matrix completion in Python.

Most of the code in the package is located in individual modules:

- :py:mod:`mmgn4py.linkfun` - link models and numerically stable kernels;
- :py:mod:`mmgn4py.obsdata` - storage of observed 1-bit entries;
- :py:mod:`mmgn4py.objective` - negative log-likelihood and its gradient;
- :py:mod:`mmgn4py.majorize` - quadratic majorization of the likelihood;
- :py:mod:`mmgn4py.gnstep` - least-norm Gauss-Newton step;
- :py:mod:`mmgn4py.solver` - defines :py:func:`~mmgn4py.solver.solve`, the
  main entry point for the whole package, and rank selection;
- :py:mod:`mmgn4py.synth` - synthetic ground truth and observations;
- :py:mod:`mmgn4py.metrics` - evaluation metrics;
- :py:mod:`mmgn4py.ingest` - ratings data pipeline;
- :py:mod:`mmgn4py.experiment` - seeded simulation sweeps;
- :py:mod:`mmgn4py.cli` - command line interface;
- :py:mod:`mmgn4py.detail` - binary file formats.

Frequently used classes and functions can be imported directly from
top-level package as::

    from mmgn4py import LinkModel, ObservationSet, SolverConfig, solve

"""

__version__ = '0.1.0'

from .linkfun import LinkModel  # noqa: F401,E402
from .obsdata import ObservationSet  # noqa: F401,E402
from .objective import FactorPair  # noqa: F401,E402
from .solver import SolverConfig, select_rank, solve  # noqa: F401,E402
