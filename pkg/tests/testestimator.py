##
# File:    testestimator.py
# Author:  shapekit maintainers
# Date:    18-Oct-2026
# Version: 0.001
#
# Update:
#
#
##
"""
Tests for the regularized mean-variance fit, its evaluation and the lambda path.
"""

__docformat__ = "google en"
__author__ = "shapekit maintainers"
__license__ = "BSD 3-Clause"

import logging
import platform
import resource
import time
import unittest

import numpy as np

from shapekit.assembly import Dataset, build_grid, build_gram
from shapekit.errors import InputError
from shapekit.estimator import evaluate, fit, fit_dense, fit_lowrank, first_order_residual, lambda_path, objective
from shapekit.inference import theta_hat
from shapekit.kernel import KernelModel
from shapekit.linalg import pivoted_cholesky
from shapekit.multiindex import MultiIndexSet
from shapekit.oracles import PolynomialFeatureKernel, spaced_dataset

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s]-%(module)s.%(funcName)s: %(message)s")
logger = logging.getLogger()
logger.setLevel(logging.INFO)


class EstimatorTests(unittest.TestCase):
    def setUp(self):
        self.__startTime = time.time()
        logger.info("Starting %s at %s", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()))
        self.rng = np.random.default_rng(2)
        self.mset = MultiIndexSet.enumerate(1, 1)
        self.kernel = KernelModel(lengthscale=0.6)
        self.sys = build_gram(spaced_dataset(12, 1, self.mset, self.rng), self.kernel, self.mset)

    def tearDown(self):
        unitS = "MB" if platform.system() == "Darwin" else "GB"
        rusageMax = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        logger.info("Maximum resident memory size %.4f %s", rusageMax / 10**6, unitS)
        endTime = time.time()
        logger.info("Completed %s at %s (%.4f seconds)", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()), endTime - self.__startTime)

    def testFirstOrderCondition(self):
        result = fit_dense(self.sys, 0.2)
        self.assertEqual(result.path, "dense")
        self.assertEqual(result.rank_used, self.sys.M)
        self.assertLess(result.residual, 1e-7)
        self.assertAlmostEqual(result.residual, first_order_residual(self.sys, result.c_hat, 0.2))
        self.assertAlmostEqual(result.objective, -result.mean_score + 0.5 * result.variance + 0.1 * result.norm_sq)

    def testObjectiveIsMinimized(self):
        result = fit(self.sys, 0.2, path="dense")
        best = objective(result, self.sys)
        self.assertAlmostEqual(best, result.objective)
        for _ in range(20):
            other = result.c_hat + 0.05 * self.rng.standard_normal(self.sys.M)
            self.assertGreaterEqual(objective(other, self.sys, 0.2), best - 1e-10)

    def testDenseMatchesLowRank(self):
        dense = fit(self.sys, 0.1, path="dense")
        pc = pivoted_cholesky(self.sys.K, rank_tol=1e-15, max_rank=self.sys.M)
        lowrank = fit_lowrank(self.sys, pc, 0.1)
        self.assertEqual(lowrank.path, "lowrank")
        grid = np.linspace(0.0, 15.0, 7)
        for alpha in ((0,), (1,)):
            gridsys = build_grid(self.sys, grid, alpha)
            a, b = theta_hat(dense, gridsys), theta_hat(lowrank, gridsys)
            self.assertLess(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))), 1e-6)

    def testAutoPath(self):
        self.assertEqual(fit(self.sys, 0.3).path, "dense")
        self.assertEqual(fit(self.sys, 0.3, dense_max_m=self.sys.M - 1).path, "lowrank")
        with self.assertRaises(InputError):
            fit(self.sys, 0.3, path="sparse")

    def testLambdaMustBePositive(self):
        for lam in (0.0, -1.0, float("nan")):
            with self.assertRaisesRegex(InputError, "lambda must be positive"):
                fit(self.sys, lam)

    def testExplicitFeatureSolution(self):
        # with a finite feature map the fit is (Sigma_psi + lambda I)^-1 mean(psi)
        kernel = PolynomialFeatureKernel()
        mset = MultiIndexSet.enumerate(1, 2)
        X = self.rng.uniform(-1.0, 1.0, (10, 1))
        W = self.rng.standard_normal((10, 3))
        sys = build_gram(Dataset(X=X, W=W), kernel, mset)
        result = fit(sys, 0.4, path="lowrank")
        psi = sum(W[:, [a]] * kernel.features(X[:, 0], alpha[0]) for a, alpha in enumerate(mset))
        psi_c = psi - psi.mean(axis=0)
        h = np.linalg.solve(psi_c.T @ psi_c / 10 + 0.4 * np.eye(3), psi.mean(axis=0))
        points = np.linspace(-1.0, 1.0, 5)
        for k in (0, 1, 2):
            expected = kernel.features(points, k) @ h
            self.assertTrue(np.allclose(evaluate(result, points, (k,)), expected, atol=1e-8))

    def testEvaluateAtSamples(self):
        result = fit(self.sys, 0.2)
        X = self.sys.basis.X
        values = evaluate(result, X, (0,))
        self.assertTrue(np.allclose(values, self.sys.K[: self.sys.N] @ result.c_hat))
        with self.assertRaises(InputError):
            evaluate(result, X, (2,))

    def testLambdaPath(self):
        gridsys = build_grid(self.sys, np.linspace(0.0, 15.0, 5), (1,))
        rows = lambda_path(self.sys, [0.05, 0.2, 1.0, 5.0], gridsys=gridsys)
        self.assertEqual([row.lam for row in rows], [0.05, 0.2, 1.0, 5.0])
        norms = [row.norm_sq for row in rows]
        self.assertEqual(norms, sorted(norms, reverse=True))
        self.assertIsNone(rows[0].theta_change)
        self.assertTrue(all(row.theta_change >= 0.0 for row in rows[1:]))
        self.assertEqual(rows[2].theta_hat.shape, (5,))

    def testResultDict(self):
        result = fit(self.sys, 0.2)
        out = result.to_dict()
        self.assertEqual(out["multi_indices"], ["0", "1"])
        self.assertEqual(out["M"], self.sys.M)
        self.assertEqual(len(out["c_hat"]), self.sys.M)
        self.assertEqual(out["lambda"], 0.2)

    def testDuplicatedPointsRankOne(self):
        mset = MultiIndexSet.enumerate(1, 0)
        X = np.full((5, 1), 0.4)
        sys = build_gram(Dataset(X=X, W=self.rng.standard_normal((5, 1))), self.kernel, mset)
        pc = pivoted_cholesky(sys.K)
        self.assertEqual(pc.rank, 1)
        lowrank = fit_lowrank(sys, pc, 0.2)
        dense = fit_dense(sys, 0.2)
        self.assertEqual(lowrank.rank_used, 1)
        points = np.linspace(-1.0, 2.0, 7)
        a, b = evaluate(dense, points, (0,)), evaluate(lowrank, points, (0,))
        self.assertLess(np.max(np.abs(a - b)), 1e-8 * max(1.0, np.max(np.abs(a))))

    def testSingleSampleHasNoVariance(self):
        X = np.array([[0.7]])
        sys = build_gram(Dataset(X=X, W=self.rng.standard_normal((1, 2))), self.kernel, self.mset)
        self.assertTrue(np.array_equal(sys.Sigma, np.zeros((2, 2))))
        result = fit_dense(sys, 0.25)
        self.assertEqual(result.jitter, 0.0)
        self.assertTrue(np.allclose(result.c_hat, sys.a_bar / 0.25, rtol=1e-12, atol=1e-14))


def buildEstimator():
    suiteSelect = unittest.TestSuite()
    suiteSelect.addTest(EstimatorTests("testFirstOrderCondition"))
    suiteSelect.addTest(EstimatorTests("testObjectiveIsMinimized"))
    suiteSelect.addTest(EstimatorTests("testDenseMatchesLowRank"))
    suiteSelect.addTest(EstimatorTests("testAutoPath"))
    suiteSelect.addTest(EstimatorTests("testLambdaMustBePositive"))
    suiteSelect.addTest(EstimatorTests("testExplicitFeatureSolution"))
    suiteSelect.addTest(EstimatorTests("testEvaluateAtSamples"))
    suiteSelect.addTest(EstimatorTests("testLambdaPath"))
    suiteSelect.addTest(EstimatorTests("testResultDict"))
    suiteSelect.addTest(EstimatorTests("testDuplicatedPointsRankOne"))
    suiteSelect.addTest(EstimatorTests("testSingleSampleHasNoVariance"))
    return suiteSelect


if __name__ == "__main__":
    mySuite = buildEstimator()
    unittest.TextTestRunner(verbosity=2).run(mySuite)
