##
# File:    testoracles.py
# Author:  shapekit maintainers
# Date:    18-Oct-2026
# Version: 0.001
#
# Update:
#
#
##
"""
Tests for the independent numerical checks run by ``shapekit validate``.
"""

__docformat__ = "google en"
__author__ = "shapekit maintainers"
__license__ = "BSD 3-Clause"

import logging
import os
import platform
import resource
import time
import unittest

import numpy as np

from shapekit import oracles

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s]-%(module)s.%(funcName)s: %(message)s")
logger = logging.getLogger()
logger.setLevel(logging.INFO)

SLOW = os.environ.get("SHAPEKIT_SLOW_TESTS") == "1"


class OracleTests(unittest.TestCase):
    def setUp(self):
        self.__startTime = time.time()
        logger.info("Starting %s at %s", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()))

    def tearDown(self):
        unitS = "MB" if platform.system() == "Darwin" else "GB"
        rusageMax = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        logger.info("Maximum resident memory size %.4f %s", rusageMax / 10**6, unitS)
        endTime = time.time()
        logger.info("Completed %s at %s (%.4f seconds)", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()), endTime - self.__startTime)

    def testPolynomialFeatureKernel(self):
        kernel = oracles.PolynomialFeatureKernel()
        x, y = np.array([[0.3], [-1.2]]), np.array([[0.7]])
        xy = x[:, 0] * 0.7
        self.assertTrue(np.allclose(kernel.deriv_matrix((0,), (0,), x, y)[:, 0], (1.0 + xy) ** 2))
        self.assertTrue(np.allclose(kernel.deriv_matrix((1,), (1,), x, y)[:, 0], 2.0 + 4.0 * xy))
        self.assertTrue(np.allclose(kernel.deriv_matrix((2,), (0,), x, y)[:, 0], 2.0 * 0.7**2))
        self.assertTrue(np.allclose(kernel.deriv_matrix((2,), (2,), x, y)[:, 0], 4.0))

    def testBruteForceNnls(self):
        c, best = oracles.nnls_bruteforce(np.eye(3), np.array([1.0, -2.0, 0.5]))
        self.assertTrue(np.allclose(c, [1.0, 0.0, 0.5]))
        self.assertAlmostEqual(best, 4.0)

    def testQuickOracles(self):
        outcomes = [
            oracles.kernel_finite_differences(),
            oracles.dense_vs_lowrank(instances=10),
            oracles.nnls_enumeration(instances=40),
            oracles.omega_feature_oracle(instances=3),
            oracles.moreau_identity(draws=200),
            oracles.reproducing_property(fits=5),
        ]
        for outcome in outcomes:
            logger.info("%s", outcome.line())
            self.assertTrue(outcome.passed, outcome.line())

    def testToleranceScaleFails(self):
        outcome = oracles.nnls_enumeration(instances=20, tolerance_scale=-1.0)
        self.assertFalse(outcome.passed)
        self.assertTrue(outcome.line().startswith("FAIL"))

    @unittest.skipUnless(SLOW, "set SHAPEKIT_SLOW_TESTS=1 for the full validation run")
    def testRunAll(self):
        outcomes = oracles.run_all(seed=0)
        self.assertEqual(len(outcomes), len(oracles.ORACLES) + 1)
        for outcome in outcomes:
            self.assertTrue(outcome.passed, outcome.line())


def buildOracles():
    suiteSelect = unittest.TestSuite()
    suiteSelect.addTest(OracleTests("testPolynomialFeatureKernel"))
    suiteSelect.addTest(OracleTests("testBruteForceNnls"))
    suiteSelect.addTest(OracleTests("testQuickOracles"))
    suiteSelect.addTest(OracleTests("testToleranceScaleFails"))
    suiteSelect.addTest(OracleTests("testRunAll"))
    return suiteSelect


if __name__ == "__main__":
    mySuite = buildOracles()
    unittest.TextTestRunner(verbosity=2).run(mySuite)
