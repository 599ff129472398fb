##
# File:    testsimulation.py
# Author:  shapekit maintainers
# Date:    18-Oct-2026
# Version: 0.001
#
# Update:
#
#
##
"""
Tests for the covariance designs, the violations and the size/power experiment.
"""

__docformat__ = "google en"
__author__ = "shapekit maintainers"
__license__ = "BSD 3-Clause"

import io
import logging
import math
import os
import platform
import resource
import time
import unittest

import numpy as np
import pandas as pd

from shapekit.errors import InputError
from shapekit.simulation import SimulationConfig, make_covariance, make_violation, random_orthogonal, run_experiment

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s]-%(module)s.%(funcName)s: %(message)s")
logger = logging.getLogger()
logger.setLevel(logging.INFO)

SLOW = os.environ.get("SHAPEKIT_SLOW_TESTS") == "1"


class SimulationTests(unittest.TestCase):
    def setUp(self):
        self.__startTime = time.time()
        logger.info("Starting %s at %s", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()))

    def tearDown(self):
        unitS = "MB" if platform.system() == "Darwin" else "GB"
        rusageMax = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        logger.info("Maximum resident memory size %.4f %s", rusageMax / 10**6, unitS)
        endTime = time.time()
        logger.info("Completed %s at %s (%.4f seconds)", self.id(), time.strftime("%Y %m %d %H:%M:%S", time.localtime()), endTime - self.__startTime)

    def testViolationSize(self):
        support, delta = make_violation("mild", 100, rng=0)
        self.assertEqual(len(support), 5)
        self.assertAlmostEqual(delta, math.sqrt(math.log(100)) / math.sqrt(5), places=14)
        shift = np.zeros(100)
        shift[support] = -delta
        self.assertAlmostEqual(np.linalg.norm(shift), math.sqrt(math.log(100)), places=12)
        self.assertEqual(len(set(support.tolist())), 5)
        for level, k in (("moderate", 10), ("strong", 25)):
            support, delta = make_violation(level, 100, rng=1)
            self.assertEqual(len(support), k)
            self.assertAlmostEqual(math.sqrt(k) * delta, math.sqrt(math.log(100)), places=12)
        support, delta = make_violation("null", 10)
        self.assertEqual(len(support), 0)
        self.assertEqual(delta, 0.0)
        self.assertEqual(len(make_violation("mild", 10, rng=0)[0]), 1)
        with self.assertRaises(InputError):
            make_violation("mild", 1)
        with self.assertRaises(InputError):
            make_violation("huge", 10)

    def testViolationConstants(self):
        cfg = SimulationConfig(c_mild=0.5, c_mod=1.5, c_strong=2.5)
        for level, c in (("mild", 0.5), ("moderate", 1.5), ("strong", 2.5)):
            support, delta = make_violation(level, 40, cfg, rng=3)
            self.assertAlmostEqual(math.sqrt(len(support)) * delta, c * math.sqrt(math.log(40)), places=12)

    def testCovarianceDesigns(self):
        cfg = SimulationConfig()
        self.assertTrue(np.array_equal(make_covariance("identity", 4, cfg), np.eye(4)))
        decay = make_covariance("decay", 6, cfg, seed=1)
        self.assertTrue(np.allclose(np.linalg.eigvalsh(decay), np.sort(1.0 / np.arange(1, 7))))
        self.assertTrue(np.allclose(decay, decay.T))
        spike = make_covariance("spike", 10, cfg, seed=1)
        eig = np.sort(np.linalg.eigvalsh(spike))[::-1]
        self.assertTrue(np.allclose(eig[:2], 10.0))
        self.assertTrue(np.all((eig[2:] >= 0.5 - 1e-10) & (eig[2:] <= 1.5 + 1e-10)))
        self.assertEqual(cfg.spikes(10), 2)
        self.assertEqual(cfg.spikes(50), 5)
        self.assertEqual(SimulationConfig(spike_count=3).spikes(10), 3)
        self.assertTrue(np.array_equal(make_covariance("decay", 6, cfg, seed=1), decay))
        self.assertFalse(np.allclose(make_covariance("decay", 6, cfg, seed=2), decay))
        with self.assertRaises(InputError):
            make_covariance("banded", 4, cfg)

    def testRandomOrthogonal(self):
        Q = random_orthogonal(5, np.random.default_rng(0))
        self.assertTrue(np.allclose(Q.T @ Q, np.eye(5)))

    def testConfigValidation(self):
        for kwargs in (
            {"reps": 0},
            {"level": 1.5},
            {"mc_reps": 50},
            {"designs": ("identity", "banded")},
            {"violations": ()},
            {"plugin": "bootstrap"},
            {"n_list": (1,), "violations": ("mild",)},
            {"bulk_low": 2.0, "bulk_high": 1.0},
            {"seed": -1},
        ):
            with self.assertRaises(InputError, msg=str(kwargs)):
                SimulationConfig(**kwargs)
        cfg = SimulationConfig(n_list=[5], N_list=[100])
        self.assertEqual(cfg.n_list, (5,))
        self.assertEqual(cfg.to_dict()["N_list"], [100])

    def testExperimentDeterminism(self):
        cfg = SimulationConfig(n_list=(3,), N_list=(200,), designs=("identity", "decay"), violations=("null", "strong"), reps=12, mc_reps=100, seed=9, plugin="exact")
        one = run_experiment(cfg, threads=1)
        two = run_experiment(cfg, threads=3)
        self.assertEqual(one.rows, two.rows)
        self.assertEqual(len(one.rows), 4)
        self.assertEqual([(r.design, r.violation) for r in one.rows], [("identity", "null"), ("identity", "strong"), ("decay", "null"), ("decay", "strong")])
        self.assertEqual(one.failures, {})
        self.assertTrue(all(row.reps == 12 for row in one.rows))

    def testStrongViolationIsDetected(self):
        cfg = SimulationConfig(n_list=(4,), N_list=(500,), designs=("identity",), violations=("strong",), reps=20, mc_reps=100, c_strong=3.0)
        result = run_experiment(cfg)
        row = result.rows[0]
        logger.info("Strong violation rejection rate %.3f", row.rejection_rate)
        self.assertEqual(row.rejection_rate, 1.0)
        self.assertEqual(row.mc_stderr, 0.0)

    def testCsvAndMetadata(self):
        cfg = SimulationConfig(n_list=(3,), N_list=(100,), designs=("spike",), violations=("null",), reps=5, mc_reps=100)
        result = run_experiment(cfg)
        text = result.to_csv()
        self.assertTrue(text.startswith("design,n,N,violation,reps,rejection_rate,mc_stderr\n"))
        frame = pd.read_csv(io.StringIO(text))
        self.assertEqual(frame.shape, (1, 7))
        self.assertEqual(frame.loc[0, "design"], "spike")
        meta = result.metadata()
        self.assertEqual(meta["config"]["mc_reps"], 100)
        self.assertEqual(meta["spike_counts"], {"3": 2})
        self.assertIn("format_version", meta)

    def testSamplePluginDeterminism(self):
        cfg = SimulationConfig(n_list=(4,), N_list=(200,), violations=("null", "mild"), reps=16, mc_reps=100, seed=3)
        self.assertEqual(cfg.plugin, "sample")
        one = run_experiment(cfg, threads=1).to_csv().encode("utf-8")
        eight = run_experiment(cfg, threads=8).to_csv().encode("utf-8")
        self.assertEqual(one, eight)
        self.assertEqual(one.count(b"\n"), 1 + 3 * 2)

    def testSingleCellRuntime(self):
        cfg = SimulationConfig(n_list=(10,), N_list=(500,), designs=("identity",), violations=("null",), reps=100, mc_reps=1000)
        start = time.time()
        row = run_experiment(cfg, threads=4).rows[0]
        elapsed = time.time() - start
        logger.info("Single cell: rejection rate %.3f in %.2f seconds", row.rejection_rate, elapsed)
        self.assertEqual(row.reps, 100)
        self.assertLess(elapsed, 60.0)

    @unittest.skipUnless(SLOW, "set SHAPEKIT_SLOW_TESTS=1 for acceptance-scale Monte Carlo checks")
    def testSizeAcceptance(self):
        cfg = SimulationConfig(n_list=(10,), N_list=(2000,), designs=("identity",), violations=("null",), reps=500, mc_reps=2000)
        start = time.time()
        row = run_experiment(cfg, threads=8).rows[0]
        elapsed = time.time() - start
        logger.info("Size %.4f (stderr %.4f) in %.1f seconds", row.rejection_rate, row.mc_stderr, elapsed)
        self.assertEqual(row.reps, 500)
        self.assertGreaterEqual(row.rejection_rate, 0.02)
        self.assertLessEqual(row.rejection_rate, 0.09)
        self.assertLess(elapsed, 300.0)

    @unittest.skipUnless(SLOW, "set SHAPEKIT_SLOW_TESTS=1 for acceptance-scale Monte Carlo checks")
    def testPowerAcceptance(self):
        cfg = SimulationConfig(n_list=(10,), N_list=(500, 1000, 2000), reps=500, mc_reps=1000)
        frame = run_experiment(cfg, threads=8).to_frame()
        logger.info("Size/power table\n%s", frame.to_string())
        for design in cfg.designs:
            cells = frame[frame.design == design]
            null = cells[cells.violation == "null"]
            self.assertTrue(np.all(null.rejection_rate <= 0.05 + 3 * null.mc_stderr + 0.01), design)
            for violation in ("mild", "moderate", "strong"):
                by_n = cells[cells.violation == violation].sort_values("N")
                rate, stderr = by_n.rejection_rate.to_numpy(), by_n.mc_stderr.to_numpy()
                slack = 2.0 * np.hypot(stderr[:-1], stderr[1:])
                self.assertTrue(np.all(rate[1:] >= rate[:-1] - slack), f"{design}/{violation}: {rate}")
            top = cells[cells.N == 2000].set_index("violation")["rejection_rate"]
            if design == "identity":
                self.assertGreaterEqual(top["strong"], 0.9)
            self.assertGreaterEqual(top["strong"], top["moderate"], design)
            self.assertGreaterEqual(top["moderate"], top["mild"] - 0.05, design)

    @unittest.skipUnless(SLOW, "set SHAPEKIT_SLOW_TESTS=1 for acceptance-scale Monte Carlo checks")
    def testExactPluginAcceptance(self):
        cfg = SimulationConfig(n_list=(10,), N_list=(500, 1000, 2000), designs=("identity",), reps=500, mc_reps=1000, plugin="exact")
        frame = run_experiment(cfg, threads=4).to_frame()
        logger.info("Size/power table\n%s", frame.to_string())
        null = frame[frame.violation == "null"]
        self.assertTrue(np.all(null.rejection_rate <= 0.05 + 2 * null.mc_stderr + 0.01))
        top = frame[(frame.N == 2000)].set_index("violation")["rejection_rate"]
        self.assertGreaterEqual(top["strong"], 0.9)
        self.assertGreaterEqual(top["strong"], top["moderate"])
        self.assertGreaterEqual(top["moderate"], top["mild"] - 0.05)


def buildSimulation():
    suiteSelect = unittest.TestSuite()
    suiteSelect.addTest(SimulationTests("testViolationSize"))
    suiteSelect.addTest(SimulationTests("testViolationConstants"))
    suiteSelect.addTest(SimulationTests("testCovarianceDesigns"))
    suiteSelect.addTest(SimulationTests("testRandomOrthogonal"))
    suiteSelect.addTest(SimulationTests("testConfigValidation"))
    suiteSelect.addTest(SimulationTests("testExperimentDeterminism"))
    suiteSelect.addTest(SimulationTests("testStrongViolationIsDetected"))
    suiteSelect.addTest(SimulationTests("testCsvAndMetadata"))
    suiteSelect.addTest(SimulationTests("testSamplePluginDeterminism"))
    suiteSelect.addTest(SimulationTests("testSingleCellRuntime"))
    suiteSelect.addTest(SimulationTests("testSizeAcceptance"))
    suiteSelect.addTest(SimulationTests("testPowerAcceptance"))
    suiteSelect.addTest(SimulationTests("testExactPluginAcceptance"))
    return suiteSelect


if __name__ == "__main__":
    mySuite = buildSimulation()
    unittest.TextTestRunner(verbosity=2).run(mySuite)
