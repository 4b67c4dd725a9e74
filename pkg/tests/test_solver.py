#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `mmgn4py.solver` module."""

import dataclasses
import math
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from mmgn4py import gnstep, majorize, objective, obsdata, solver, synth
from mmgn4py.linkfun import LinkModel
from mmgn4py.solver import ArmijoParams, InitKind, SolverConfig, StopReason


def _all_plus(m, n):
    rows = np.tile(np.arange(m), n)
    cols = np.repeat(np.arange(n), m)
    return obsdata.ObservationSet.from_arrays(m, n, rows, cols, np.ones(m * n))


def _synthetic(m, n, r_star, rho, model, seed):
    truth = synth.gen_nonspiky(m, n, r_star, seed)
    omega = synth.sample_omega(m, n, rho, seed + 1)
    return truth, synth.sample_labels(truth, omega, model, seed + 2)


class TestConfig(unittest.TestCase):
    """Tests for configuration classes."""

    def test_001_defaults(self):
        """Test default values."""

        config = SolverConfig(rank=3)
        self.assertEqual(config.tol, 1e-4)
        self.assertEqual(config.max_outer_iter, 1000)
        self.assertEqual(config.armijo, ArmijoParams(c1=1e-4, shrink=0.5, max_backtracks=20))
        self.assertEqual(config.inner.tol, 1e-6)
        self.assertIsNone(config.inner.max_iter)
        self.assertIs(config.init, InitKind.SPECTRAL)
        self.assertIs(SolverConfig(rank=1, init="random").init, InitKind.RANDOM)
        self.assertEqual(dataclasses.replace(config, rank=5).rank, 5)

    def test_002_invalid(self):
        """Test validation of parameters."""

        with self.assertRaises(ValueError):
            SolverConfig(rank=0)
        with self.assertRaises(ValueError):
            SolverConfig(rank=1, tol=0.)
        with self.assertRaises(ValueError):
            SolverConfig(rank=1, max_outer_iter=0)
        with self.assertRaises(ValueError):
            SolverConfig(rank=1, init="svd")
        with self.assertRaises(ValueError):
            ArmijoParams(c1=1.)
        with self.assertRaises(ValueError):
            ArmijoParams(shrink=0.)
        with self.assertRaises(ValueError):
            solver.InnerParams(tol=-1.)


class TestInitialize(unittest.TestCase):
    """Tests for initialize()."""

    def test_001_ones(self):
        """Test spectral initialization of all-ones matrix."""

        obs = _all_plus(5, 4)
        f = solver.initialize(obs, 1, InitKind.SPECTRAL)
        assert_allclose(f.dense(), np.ones((5, 4)), atol=1e-10)

    def test_002_random(self):
        """Test random initialization is seeded."""

        obs = _all_plus(6, 4)
        f1 = solver.initialize(obs, 2, InitKind.RANDOM, seed=5)
        f2 = solver.initialize(obs, 2, "random", seed=5)
        f3 = solver.initialize(obs, 2, InitKind.RANDOM, seed=6)
        self.assertEqual(f1, f2)
        self.assertNotEqual(f1, f3)
        self.assertEqual(f1.u.shape, (6, 2))
        self.assertEqual(f1.v.shape, (4, 2))

    def test_003_spectral_oracle(self):
        """Test spectral initialization against dense SVD."""

        model = LinkModel.probit(1.)
        _, obs = _synthetic(30, 20, 2, 0.5, model, seed=3)
        fill = np.zeros((30, 20))
        fill[obs.rows, obs.cols] = obs.labels / obs.density
        a, s, bt = np.linalg.svd(fill)
        for r in (1, 3):
            best = (a[:, :r] * s[:r]) @ bt[:r]
            f = solver.initialize(obs, r)
            self.assertLessEqual(np.linalg.norm(f.dense() - best), 1e-8)
            # sparse truncated SVD path
            with mock.patch.object(solver, "_DENSE_SVD_LIMIT", 0):
                f = solver.initialize(obs, r)
            self.assertLessEqual(np.linalg.norm(f.dense() - best), 1e-6 * np.linalg.norm(best))

    def test_004_range(self):
        """Test rank validation."""

        obs = _all_plus(3, 2)
        with self.assertRaises(ValueError):
            solver.initialize(obs, 0)
        with self.assertRaises(ValueError):
            solver.initialize(obs, 3)


class TestArmijo(unittest.TestCase):
    """Tests for armijo_backtrack()."""

    def test_001_full_step(self):
        """Test that decreasing full step is accepted."""

        alpha, value = solver.armijo_backtrack(lambda a: -a, 0., -1., ArmijoParams())
        self.assertEqual(alpha, 1.)
        self.assertEqual(value, -1.)

    def test_002_backtrack(self):
        """Test halving until sufficient decrease."""

        calls = []

        def fun(a):
            calls.append(a)
            return (a - 0.1) ** 2

        alpha, value = solver.armijo_backtrack(fun, 0.01, -0.2, ArmijoParams())
        self.assertEqual(alpha, 0.125)
        self.assertEqual(calls, [1., 0.5, 0.25, 0.125])
        self.assertAlmostEqual(value, 0.025 ** 2, places=15)

    def test_003_stall(self):
        """Test exhausted backtracking."""

        alpha, value = solver.armijo_backtrack(lambda a: 1. + a, 1., -1.,
                                               ArmijoParams(max_backtracks=5))
        self.assertEqual(alpha, 0.)
        self.assertEqual(value, 1.)


class TestSolver(unittest.TestCase):
    """Tests for mmgn_step() and solve()."""

    def test_001_step_descent(self):
        """Test that one step never increases likelihood."""

        rng = np.random.default_rng(1)
        for model in (LinkModel.probit(1.), LinkModel.logistic(1.), LinkModel.probit(0.05)):
            _, obs = _synthetic(25, 20, 1, 0.6, model, seed=int(rng.integers(1000)))
            f = solver.initialize(obs, 2, InitKind.RANDOM, seed=1)
            ll = objective.neg_log_lik(f, obs, model)
            config = SolverConfig(rank=2)
            for _ in range(5):
                outcome = solver.mmgn_step(f, obs, model, config)
                self.assertLessEqual(outcome.ll_new, ll)
                self.assertAlmostEqual(outcome.ll_new, objective.neg_log_lik(outcome.factors, obs, model),
                                       delta=1e-12 * (1 + ll))
                if outcome.stalled:
                    self.assertEqual(outcome.alpha, 0.)
                    self.assertEqual(outcome.factors, f)
                    break
                self.assertTrue(0 < outcome.alpha <= 1)
                if outcome.alpha == 1.:
                    # likelihood never exceeds surrogate
                    target = majorize.build_target(f, obs, model)
                    g = majorize.surrogate_value(target, outcome.factors, f, obs)
                    self.assertLessEqual(outcome.ll_new, g + 1e-10 * (1 + abs(g)))
                f, ll = outcome.factors, outcome.ll_new

    def test_002_separable(self):
        """Test noiseless separable instance."""

        obs = _all_plus(10, 8)
        model = LinkModel.probit(1.)
        report = solver.solve(obs, model, SolverConfig(rank=1, tol=1e-2))
        self.assertIs(report.stop_reason, StopReason.TOL_MET)
        self.assertEqual(len(report.ll_trace), report.outer_iterations + 1)
        self.assertTrue(np.all(np.diff(report.ll_trace) < 0))
        self.assertLess(report.ll_trace[-1], 0.1 * report.ll_trace[0])
        self.assertTrue(np.all(report.factors.dense() > 0))
        rel = abs(report.ll_trace[-1] - report.ll_trace[-2]) / report.ll_trace[-2]
        self.assertLessEqual(rel, 1e-2)

    def test_003_monotone(self):
        """Test monotone descent over many seeded solves."""

        for seed in range(10):
            for model in (LinkModel.probit(1.), LinkModel.logistic(0.5)):
                _, obs = _synthetic(20, 15, 1 + seed % 2, 0.7, model, seed=100 + seed)
                config = SolverConfig(rank=1 + seed % 3, max_outer_iter=30, seed=seed,
                                      init=InitKind.RANDOM if seed % 2 else InitKind.SPECTRAL)
                report = solver.solve(obs, model, config)
                trace = np.array(report.ll_trace)
                slack = 1e-12 * (1 + np.abs(trace[:-1]))
                self.assertTrue(np.all(trace[1:] <= trace[:-1] + slack))
                self.assertTrue(all(0 < a <= 1 for a in report.step_sizes))
                self.assertEqual(report.factors.rank, config.rank)
                self.assertEqual(len(report.inner_iterations), len(report.step_sizes))
                if report.stop_reason is StopReason.TOL_MET:
                    rel = abs(trace[-1] - trace[-2]) / abs(trace[-2])
                    self.assertLessEqual(rel, config.tol)

    def test_004_deterministic(self):
        """Test that identical runs give identical reports."""

        model = LinkModel.logistic(1.)
        _, obs = _synthetic(30, 30, 2, 0.5, model, seed=7)
        config = SolverConfig(rank=2, max_outer_iter=20)
        report1 = solver.solve(obs, model, config)
        report2 = solver.solve(obs, model, config)
        self.assertEqual(report1.ll_trace, report2.ll_trace)
        self.assertEqual(report1.step_sizes, report2.step_sizes)
        assert_array_equal(report1.factors.u, report2.factors.u)

    def test_005_report(self):
        """Test report contents and callback."""

        model = LinkModel.probit(1.)
        _, obs = _synthetic(20, 20, 1, 0.8, model, seed=9)
        seen = []
        report = solver.solve(obs, model, SolverConfig(rank=1, max_outer_iter=3),
                              callback=lambda it, outcome: seen.append(it))
        self.assertEqual(seen, list(range(report.outer_iterations)))
        self.assertLessEqual(report.outer_iterations, 3)
        data = report.to_dict()
        self.assertEqual(data["rank"], 1)
        self.assertEqual(data["stop_reason"], report.stop_reason.value)
        self.assertEqual(data["ll_trace"], report.ll_trace)
        self.assertGreaterEqual(data["runtime_seconds"], 0.)
        self.assertTrue(0. <= report.full_step_fraction <= 1.)
        self.assertEqual(report.final_ll, report.ll_trace[-1])

        # explicit initial factors must match rank
        with self.assertRaises(ValueError):
            solver.solve(obs, model, SolverConfig(rank=2), init=report.factors)

    def test_006_stall(self):
        """Test stall handling when line search fails."""

        model = LinkModel.probit(1.)
        _, obs = _synthetic(15, 15, 1, 0.8, model, seed=11)
        with mock.patch.object(solver, "armijo_backtrack", return_value=(0.0, 0.0)):
            report = solver.solve(obs, model, SolverConfig(rank=1))
        self.assertIs(report.stop_reason, StopReason.STALLED)
        self.assertEqual(report.outer_iterations, 0)
        self.assertEqual(report.step_sizes, [])
        self.assertEqual(len(report.ll_trace), 1)

    def test_007_max_iter(self):
        """Test iteration limit."""

        obs = _all_plus(6, 6)
        report = solver.solve(obs, LinkModel.probit(1.), SolverConfig(rank=1, tol=1e-12,
                                                                      max_outer_iter=4))
        self.assertIs(report.stop_reason, StopReason.MAX_ITER)
        self.assertEqual(report.outer_iterations, 4)

    def test_008_overshoot(self):
        """Test anchor where full Gauss-Newton step is rejected."""

        model = LinkModel.logistic(1.)
        obs = obsdata.ObservationSet.from_arrays(2, 2, [0, 1, 0, 1], [0, 0, 1, 1], [1, -1, -1, -1])
        config = SolverConfig(rank=1)
        for eps in (1e-3, 1e-2, 0.1):
            f = objective.FactorPair(np.array([[eps], [eps]]), np.array([[eps], [-eps]]))
            ll = objective.neg_log_lik(f, obs, model)
            outcome = solver.mmgn_step(f, obs, model, config)
            self.assertFalse(outcome.stalled)
            self.assertTrue(0 < outcome.alpha < 1)
            # step sizes come from halving
            self.assertEqual(np.log2(outcome.alpha), round(np.log2(outcome.alpha)))
            self.assertLessEqual(outcome.ll_new, ll)
            self.assertAlmostEqual(outcome.ll_new, objective.neg_log_lik(outcome.factors, obs, model),
                                   delta=1e-12 * (1 + ll))

    def test_009_descent_direction(self):
        """Test that Gauss-Newton direction has non-positive slope."""

        rng = np.random.default_rng(12)
        for model in (LinkModel.probit(1.), LinkModel.logistic(0.5)):
            _, obs = _synthetic(20, 15, 2, 0.5, model, seed=int(rng.integers(1000)))
            for r in (1, 2, 3):
                f = solver.initialize(obs, r, InitKind.RANDOM, seed=int(rng.integers(1000)))
                target = majorize.build_target(f, obs, model)
                op = gnstep.JacobianOperator(f, obs)
                step = gnstep.solve_min_norm(op, target.x_values, tol=1e-10,
                                             max_iter=50 * op.domain_size)
                direction = op.apply(step.delta_u, step.delta_v)
                grad = objective.grad_neg_log_lik(f, obs, model)
                slope = math.fsum(grad * direction)
                self.assertLessEqual(slope, 0.)
                # least-squares fit makes slope equal to -L |J d|^2
                expected = -target.lipschitz * float(np.dot(direction, direction))
                self.assertAlmostEqual(slope, expected, delta=1e-6 * abs(expected))


class TestSelectRank(unittest.TestCase):
    """Tests for select_rank()."""

    def test_001_tie_break(self):
        """Test that ties go to the smaller rank."""

        self.assertEqual(solver._choose_rank([(2, -5.), (1, -5.)]), 1)
        self.assertEqual(solver._choose_rank([(1, -5.), (2, -5. + 1e-15)]), 1)
        self.assertEqual(solver._choose_rank([(1, -5.), (2, -4.), (3, -4.5)]), 2)

    def test_002_single(self):
        """Test single candidate."""

        model = LinkModel.probit(1.)
        _, obs = _synthetic(20, 20, 1, 0.5, model, seed=21)
        config = SolverConfig(rank=1, max_outer_iter=10)
        selection = solver.select_rank(obs, model, [1], config=config)
        self.assertEqual(selection.chosen_rank, 1)
        self.assertEqual([r for r, _ in selection.per_rank_validation_ll], [1])
        self.assertEqual(selection.report.factors.rank, 1)

    def test_003_candidates(self):
        """Test several candidates and thread pool."""

        model = LinkModel.probit(1.)
        _, obs = _synthetic(40, 30, 1, 0.8, model, seed=22)
        config = SolverConfig(rank=1, max_outer_iter=20)
        sel1 = solver.select_rank(obs, model, [3, 1, 2], config=config, refit=False)
        self.assertIsNone(sel1.report)
        self.assertEqual([r for r, _ in sel1.per_rank_validation_ll], [1, 2, 3])
        best = max(ll for _, ll in sel1.per_rank_validation_ll)
        self.assertEqual(dict(sel1.per_rank_validation_ll)[sel1.chosen_rank], best)
        self.assertTrue(all(ll < 0 for _, ll in sel1.per_rank_validation_ll))

        sel2 = solver.select_rank(obs, model, [1, 2, 3], config=config, jobs=3)
        self.assertEqual(sel1.per_rank_validation_ll, sel2.per_rank_validation_ll)
        self.assertEqual(sel2.report.factors.rank, sel2.chosen_rank)

    def test_004_invalid(self):
        """Test invalid candidate lists."""

        obs = _all_plus(4, 3)
        model = LinkModel.probit(1.)
        with self.assertRaises(ValueError):
            solver.select_rank(obs, model, [])
        with self.assertRaises(ValueError):
            solver.select_rank(obs, model, [1, 4])
