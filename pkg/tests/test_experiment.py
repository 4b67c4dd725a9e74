#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `mmgn4py.experiment` module."""

from contextlib import contextmanager
import csv
import math
import os
import tempfile
import unittest
from unittest import mock

from mmgn4py import experiment, solver
from mmgn4py.experiment import ConfigError, MedianRow, SweepAxis
from mmgn4py.linkfun import LinkKind
from mmgn4py.synth import TruthKind


@contextmanager
def _temp_file(data=""):
    """Create file with given contents, remove file on exit."""
    fd, fname = tempfile.mkstemp()
    try:
        os.write(fd, data.encode())
    finally:
        os.close(fd)
    yield fname
    os.unlink(fname)


def _small_dict(**kw):
    data = dict(truth=dict(kind="nonspiky", m=20, n=15, rank_star=1),
                model=dict(kind="probit", sigma=1.0),
                rho=0.6,
                solver=dict(rank=1, tol=1e-3, max_outer_iter=50),
                replicates=2,
                seed=7)
    data.update(kw)
    return data


class TestConfig(unittest.TestCase):
    """Tests for configuration parsing."""

    def test_001_defaults(self):
        """Test parsing of small configuration."""

        config = experiment.config_from_dict(_small_dict())
        self.assertIs(config.truth_kind, TruthKind.NONSPIKY)
        self.assertEqual((config.m, config.n, config.rank_star), (20, 15, 1))
        self.assertIs(config.model.kind, LinkKind.PROBIT)
        self.assertIsNone(config.solver_model)
        self.assertEqual(config.solver.rank, 1)
        self.assertEqual(config.solver.tol, 1e-3)
        self.assertIsNone(config.candidate_ranks)
        self.assertIsNone(config.sweep_axis)
        self.assertEqual(config.grid(), [None])
        self.assertEqual(config.output, ".")

        again = experiment.config_from_dict(config.to_dict())
        self.assertEqual(again, config)

    def test_002_sweep(self):
        """Test sweep and rank selection sections."""

        data = _small_dict(sweep=dict(axis="rho", values=[0.2, 0.4]),
                           solver=dict(candidate_ranks=[3, 1, 2]),
                           solver_model=dict(kind="logistic", sigma=0.5))
        config = experiment.config_from_dict(data)
        self.assertIs(config.sweep_axis, SweepAxis.RHO)
        self.assertEqual(config.grid(), [0.2, 0.4])
        self.assertEqual(config.candidate_ranks, (3, 1, 2))
        self.assertEqual(config.solver.rank, 1)
        self.assertIs(config.solver_model.kind, LinkKind.LOGISTIC)
        self.assertEqual(experiment.config_from_dict(config.to_dict()), config)

    def test_003_invalid(self):
        """Test invalid configurations."""

        cases = [_small_dict(rho=1.5),
                 _small_dict(rho=0.),
                 _small_dict(jobs=4),
                 _small_dict(model=None),
                 _small_dict(model=dict(kind="cauchy")),
                 _small_dict(model=dict(sigma=-1)),
                 _small_dict(solver=dict(tol=1e-3)),
                 _small_dict(truth=dict(kind="spiky", m=10)),
                 _small_dict(truth=dict(kind="spiky", m=10, nu=2)),
                 _small_dict(truth=dict(m=10, rank_star=11)),
                 _small_dict(truth="big"),
                 _small_dict(replicates=0),
                 _small_dict(sweep=dict(axis="rho", values=[])),
                 _small_dict(sweep=dict(axis="mu", values=[1])),
                 _small_dict(sweep=dict(axis="rank_star", values=[1, 16])),
                 _small_dict(sweep=dict(axis="nu", values=[3])),
                 _small_dict(sweep=dict(axis="n", values=[10, 0.5])),
                 [1, 2]]
        for data in cases:
            with self.assertRaises(ConfigError, msg=str(data)):
                experiment.config_from_dict(data)

    def test_004_load(self):
        """Test reading YAML file."""

        text = ("truth: {kind: spiky, m: 12, n: 10, rank_star: 2, nu: 5}\n"
                "model: {kind: logistic, sigma: 0.5}\n"
                "rho: 0.5\n"
                "solver: {rank: 2}\n"
                "sweep: {axis: sigma, values: [0.5, 1.0]}\n"
                "replicates: 3\n")
        with _temp_file(text) as fname:
            config = experiment.load_config(fname)
        self.assertIs(config.truth_kind, TruthKind.SPIKY)
        self.assertEqual(config.nu, 5.)
        self.assertEqual(config.replicates, 3)
        self.assertEqual(config.seed, 0)

        with _temp_file("truth: [1, 2\n") as fname:
            with self.assertRaises(ConfigError):
                experiment.load_config(fname)


class TestRunSpec(unittest.TestCase):
    """Tests for seeds and grid points."""

    def test_001_seeds(self):
        """Test seed derivation."""

        seeds = experiment.derive_seeds(12345, 0, 0)
        self.assertEqual(seeds, experiment.derive_seeds(12345, 0, 0))
        self.assertEqual(len(set(seeds)), 4)
        others = {experiment.derive_seeds(12345, 0, 1), experiment.derive_seeds(12345, 1, 0),
                  experiment.derive_seeds(12346, 0, 0)}
        self.assertEqual(len(others | {seeds}), 4)
        for value in seeds:
            self.assertIsInstance(value, int)

    def test_002_axes(self):
        """Test that swept value replaces parameter."""

        config = experiment.config_from_dict(_small_dict(sweep=dict(axis="sigma",
                                                                    values=[0.25, 2.])))
        spec = experiment.make_run_spec(config, 0.25)
        self.assertEqual(spec.model.sigma, 0.25)
        self.assertEqual(spec.solver_model.sigma, 0.25)
        self.assertIs(spec.solver_model.kind, LinkKind.PROBIT)

        config = experiment.config_from_dict(_small_dict(sweep=dict(axis="n", values=[5, 8])))
        spec = experiment.make_run_spec(config, 8)
        self.assertEqual((spec.m, spec.n), (8, 8))

        config = experiment.config_from_dict(_small_dict(sweep=dict(axis="rank_star",
                                                                    values=[1, 3])))
        self.assertEqual(experiment.make_run_spec(config, 3).rank_star, 3)
        self.assertEqual(experiment.make_run_spec(config, 3).rho, 0.6)


class TestRuns(unittest.TestCase):
    """Tests for replicates and sweeps."""

    def test_001_replicate(self):
        """Test one replicate."""

        config = experiment.config_from_dict(_small_dict())
        result = experiment.run_replicate(config, 0, 1)
        self.assertIsNone(result.error)
        self.assertEqual(set(result.metrics), set(experiment.METRICS))
        self.assertGreaterEqual(result.metrics["relative_error"], 0.)
        self.assertTrue(0. <= result.metrics["hellinger"] <= 2.)
        self.assertEqual(result.metrics["chosen_rank"], 1.)
        self.assertTrue(0. <= result.metrics["full_step_fraction"] <= 1.)
        self.assertLessEqual(result.metrics["full_steps"], result.metrics["outer_iterations"])

        again = experiment.run_replicate(config, 0, 1)
        self.assertEqual(again.metrics["relative_error"], result.metrics["relative_error"])
        self.assertEqual(again.metrics["spikiness"], result.metrics["spikiness"])

    def test_002_rank_selection(self):
        """Test replicate with candidate ranks."""

        config = experiment.config_from_dict(_small_dict(solver=dict(candidate_ranks=[1, 2],
                                                                     max_outer_iter=30)))
        result = experiment.run_replicate(config, 0, 0)
        self.assertIn(result.metrics["chosen_rank"], (1., 2.))

    def test_003_failure(self):
        """Test that failed replicate does not stop the sweep."""

        config = experiment.config_from_dict(_small_dict(sweep=dict(axis="rho",
                                                                    values=[0.5, 1.0])))
        real_solve = solver.solve
        calls = []

        def flaky(*args, **kw):
            calls.append(1)
            if len(calls) == 2:
                raise RuntimeError("solver exploded")
            return real_solve(*args, **kw)

        with mock.patch.object(experiment, "solve", side_effect=flaky):
            results = experiment.run_sweep(config)
        self.assertEqual([(res.grid_index, res.replicate) for res in results],
                         [(0, 0), (0, 1), (1, 0), (1, 1)])
        self.assertEqual(results[1].error, "solver exploded")
        self.assertEqual(results[1].metrics, {})
        self.assertEqual(results[1].axis_value, 0.5)
        self.assertTrue(all(res.error is None for res in results if res is not results[1]))

        medians = experiment.summarize(results)
        self.assertEqual(len(medians), 2 * len(experiment.METRICS))
        counts = {(row.grid_index, row.metric): row.count for row in medians}
        self.assertEqual(counts[(0, "relative_error")], 1)
        self.assertEqual(counts[(1, "hellinger")], 2)

        with tempfile.TemporaryDirectory() as tmpdir:
            long_path = os.path.join(tmpdir, "long.csv")
            medians_path = os.path.join(tmpdir, "medians.csv")
            experiment.write_long_csv(config, results, long_path)
            experiment.write_medians_csv(config, medians, medians_path)
            with open(long_path) as file:
                rows = list(csv.reader(file))
            with open(medians_path) as file:
                median_rows = list(csv.reader(file))
        self.assertEqual(rows[0], ["grid_index", "axis", "axis_value", "replicate", "metric",
                                   "value", "error"])
        self.assertEqual(len(rows), 1 + 3 * len(experiment.METRICS) + 1)
        failed = [row for row in rows[1:] if row[6]]
        self.assertEqual(failed, [["0", "rho", "0.5", "1", "", "", "solver exploded"]])
        self.assertEqual(median_rows[0], ["grid_index", "axis", "axis_value", "metric", "median",
                                          "count"])
        self.assertEqual(len(median_rows), 1 + 2 * len(experiment.METRICS))

    def test_004_all_failed(self):
        """Test medians of grid point where every replicate failed."""

        config = experiment.config_from_dict(_small_dict())
        with mock.patch.object(experiment, "solve", side_effect=ValueError("bad")):
            results = experiment.run_sweep(config)
        self.assertEqual(len(results), 2)
        medians = experiment.summarize(results)
        self.assertEqual(len(medians), len(experiment.METRICS))
        for row in medians:
            self.assertTrue(math.isnan(row.median))
            self.assertEqual(row.count, 0)


class TestSlopes(unittest.TestCase):
    """Tests for log-log slopes."""

    def test_001_fit(self):
        """Test fit_loglog_slope()."""

        self.assertAlmostEqual(experiment.fit_loglog_slope([1., 2., 4.], [1., 0.5, 0.25]), -1.,
                               places=12)
        self.assertAlmostEqual(experiment.fit_loglog_slope([10., 100.], [3., 30.]), 1.,
                               places=12)
        with self.assertRaises(ValueError):
            experiment.fit_loglog_slope([1.], [1.])
        with self.assertRaises(ValueError):
            experiment.fit_loglog_slope([1., 2.], [1., 0.])

    def test_002_sweep_slopes(self):
        """Test slopes from medians table."""

        config = experiment.config_from_dict(_small_dict(sweep=dict(axis="rho",
                                                                    values=[0.25, 0.5, 1.0])))
        medians = []
        for k, rho in enumerate(config.grid()):
            medians.append(MedianRow(k, rho, "relative_error", 0.1 / rho, 5))
            medians.append(MedianRow(k, rho, "hellinger", 0.01 / rho ** 2, 5))
        slopes = experiment.sweep_slopes(config, medians)
        self.assertAlmostEqual(slopes["relative_error"], -1., places=12)
        self.assertAlmostEqual(slopes["hellinger"], -2., places=12)

        config = experiment.config_from_dict(_small_dict())
        self.assertEqual(experiment.sweep_slopes(config, medians), {})
