"""Independent checks of the numerical pipeline.

Each oracle recomputes a quantity by a second, simpler route and reports the
largest discrepancy against its tolerance. ``shapekit validate`` runs them all;
the unit tests reuse the helpers.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.stats import chi2

from .assembly import Dataset, build_grid, build_gram
from .estimator import evaluate, fit_dense, fit_lowrank, fit
from .inference import NullDistribution, moreau_check, omega_hat, theta_hat, wald_statistic
from .kernel import KernelModel, fd_check
from .linalg import inv_sqrt_psd, pivoted_cholesky
from .multiindex import MultiIndexSet


@dataclass(frozen=True)
class OracleOutcome:
    name: str
    passed: bool
    error: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: error {self.error:.3g} (tolerance {self.tolerance:.3g})"


def _outcome(name: str, error: float, tolerance: float) -> OracleOutcome:
    passed = bool(np.isfinite(error) and error <= tolerance)
    logging.info("Oracle %s: error %.3g, tolerance %.3g, %s", name, error, tolerance, "pass" if passed else "FAIL")
    return OracleOutcome(name=name, passed=passed, error=float(error), tolerance=float(tolerance))


class PolynomialFeatureKernel:
    """``K(x, y) = (1 + x y)^2`` on the real line, with the explicit feature map ``(1, sqrt(2) x, x^2)``"""

    s_max = 2
    p = 3

    @staticmethod
    def features(x: np.ndarray, k: int) -> np.ndarray:
        """k-th derivative of the feature map at each point; shape (len(x), 3)"""
        x = np.asarray(x, dtype=float).reshape(-1)
        one, zero = np.ones_like(x), np.zeros_like(x)
        if k == 0:
            cols = (one, math.sqrt(2.0) * x, x * x)
        elif k == 1:
            cols = (zero, math.sqrt(2.0) * one, 2.0 * x)
        elif k == 2:
            cols = (zero, zero, 2.0 * one)
        else:
            cols = (zero, zero, zero)
        return np.column_stack(cols)

    def deriv_matrix(self, a: Sequence[int], b: Sequence[int], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.features(np.asarray(X)[:, 0], a[0]) @ self.features(np.asarray(Y)[:, 0], b[0]).T


def nnls_bruteforce(D: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, float]:
    """Minimize ``||D c - b||^2`` over ``c >= 0`` by trying every support"""
    n = D.shape[1]
    best_c, best = np.zeros(n), float(b @ b)
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            cols = list(support)
            sol = np.linalg.lstsq(D[:, cols], b, rcond=None)[0]
            if np.any(sol < 0.0):
                continue
            c = np.zeros(n)
            c[cols] = sol
            r = D @ c - b
            if r @ r < best:
                best_c, best = c, float(r @ r)
    return best_c, best


def _random_spd(n: int, rng: np.random.Generator) -> np.ndarray:
    Q = rng.standard_normal((n, n))
    return Q @ Q.T / n + 0.1 * np.eye(n)


def kernel_finite_differences(seed: int = 0, tolerance_scale: float = 1.0) -> OracleOutcome:
    """Every mixed partial up to order 2 per argument against a central difference"""
    rng = np.random.default_rng(seed)
    k = KernelModel(lengthscale=1.0)
    worst = 0.0
    for d in (1, 2):
        mset = MultiIndexSet.enumerate(d, 2)
        for _ in range(3):
            x, y = rng.uniform(-1.0, 1.0, d), rng.uniform(-1.0, 1.0, d)
            for a in mset:
                for b in mset:
                    worst = max(worst, fd_check(k, a, b, x, y, 1e-3)[2])
    return _outcome("kernel finite differences", worst, 1e-4 * tolerance_scale)


def spaced_dataset(N: int, d: int, mset: MultiIndexSet, rng: np.random.Generator, spacing: float = 1.5) -> Dataset:
    """Points on a jittered lattice along the first axis with random weights"""
    X = np.zeros((N, d))
    X[:, 0] = spacing * np.arange(N) + rng.uniform(-0.25, 0.25, N)
    if d > 1:
        X[:, 1:] = rng.uniform(-1.0, 1.0, (N, d - 1))
    return Dataset(X=X, W=rng.standard_normal((N, mset.m_s)))


def dense_vs_lowrank(seed: int = 0, tolerance_scale: float = 1.0, instances: int = 50) -> OracleOutcome:
    """Grid derivatives from the dense solve and the full-rank pivoted Cholesky solve"""
    rng = np.random.default_rng(seed)
    k = KernelModel(lengthscale=0.5)
    worst = 0.0
    for _ in range(instances):
        s = int(rng.integers(0, 3))
        N = int(rng.integers(5, 31))
        mset = MultiIndexSet.enumerate(1, s)
        sys = build_gram(spaced_dataset(N, 1, mset, rng), k, mset)
        pc = pivoted_cholesky(sys.K, rank_tol=1e-15, max_rank=sys.M)
        grid = rng.uniform(0.0, 1.5 * N, (4, 1))
        alpha = (int(rng.integers(0, s + 1)),)
        gridsys = build_grid(sys, grid, alpha)
        dense = theta_hat(fit_dense(sys, 0.1), gridsys)
        lowrank = theta_hat(fit_lowrank(sys, pc, 0.1), gridsys)
        worst = max(worst, float(np.max(np.abs(dense - lowrank)) / max(1.0, float(np.max(np.abs(dense))))))
    return _outcome("dense vs low-rank fit", worst, 1e-6 * tolerance_scale)


def nnls_enumeration(seed: int = 0, tolerance_scale: float = 1.0, instances: int = 200) -> OracleOutcome:
    """Wald statistic against exhaustive enumeration of the orthant faces"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for inst in range(instances):
        n = 2 + inst % 2
        omega = _random_spd(n, rng)
        theta = rng.standard_normal(n)
        W = wald_statistic(theta, omega, 1).W_N
        R = inv_sqrt_psd(omega)
        _, best = nnls_bruteforce(R, R @ theta)
        worst = max(worst, abs(W - best) / max(1.0, best))
    return _outcome("NNLS vs active-set enumeration", worst, 1e-9 * tolerance_scale)


def explicit_feature_omega(
    X: np.ndarray, W: np.ndarray, s: int, grid: np.ndarray, alpha: int, lam: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Plug-in covariance computed coordinate-wise in the three-dimensional feature space.

    Returns:
        (Omega from the Gram-product pipeline, Omega from explicit features)
    """
    kernel = PolynomialFeatureKernel()
    mset = MultiIndexSet.enumerate(1, s)
    data = Dataset(X=X, W=W)
    sys = build_gram(data, kernel, mset)
    fitted = fit(sys, lam, path="lowrank")
    gridsys = build_grid(sys, grid, (alpha,), fitted)
    pipeline, _ = omega_hat(sys, gridsys, fitted)

    x = X[:, 0]
    N = x.shape[0]
    psi = sum(W[:, [pos]] * kernel.features(x, index[0]) for pos, index in enumerate(mset))
    basis = np.vstack([kernel.features(x, b[0]) for b in sys.basis.indices])
    h = basis.T @ fitted.c_hat
    psi_c = psi - psi.mean(axis=0)
    sigma = psi_c.T @ psi_c / N
    h_c = psi_c @ h
    F = psi_c * (1.0 - h_c)[:, None] + (sigma @ h)[None, :]
    U = np.linalg.solve(sigma + lam * np.eye(kernel.p), kernel.features(np.asarray(grid)[:, 0], alpha).T)
    proj = F @ U
    direct = proj.T @ proj / N
    return pipeline, direct


def omega_feature_oracle(seed: int = 0, tolerance_scale: float = 1.0, instances: int = 5) -> OracleOutcome:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        N = int(rng.integers(8, 16))
        n = int(rng.integers(1, 4))
        s = int(rng.integers(0, 3))
        X = rng.uniform(-1.0, 1.0, (N, 1))
        W = rng.standard_normal((N, s + 1))
        grid = rng.uniform(-1.0, 1.0, (n, 1))
        alpha = int(rng.integers(0, s + 1))
        pipeline, direct = explicit_feature_omega(X, W, s, grid, alpha, 0.5)
        worst = max(worst, float(np.max(np.abs(pipeline - direct)) / max(1.0, float(np.max(np.abs(direct))))))
    return _outcome("covariance vs explicit features", worst, 1e-8 * tolerance_scale)


def moreau_identity(seed: int = 0, tolerance_scale: float = 1.0, draws: int = 1000) -> OracleOutcome:
    rng = np.random.default_rng(seed)
    omega = _random_spd(5, rng)
    worst = 0.0
    for _ in range(draws):
        lhs, rhs = moreau_check(rng.standard_normal(5) * 2.0, omega)
        worst = max(worst, abs(lhs - rhs) / max(1.0, lhs))
    return _outcome("Moreau decomposition", worst, 1e-9 * tolerance_scale)


def chi_bar_scalar(seed: int = 0, tolerance_scale: float = 1.0, reps: int = 10000) -> List[OracleOutcome]:
    """One grid point with unit variance: half the null mass sits at zero, the rest is chi-square(1)"""
    null = NullDistribution.simulate(np.eye(1), reps=reps, seed=seed)
    zero_mass = float(np.mean(null.samples == 0.0))
    target = 0.5 * chi2.sf(6.635, 1)
    p = null.pvalue(6.635)
    return [
        _outcome("chi-bar zero mass", abs(zero_mass - 0.5), 0.02 * tolerance_scale),
        _outcome("chi-bar tail p-value", abs(p - target), 0.003 * tolerance_scale),
    ]


def reproducing_property(seed: int = 0, tolerance_scale: float = 1.0, fits: int = 20) -> OracleOutcome:
    """Derivatives of the fitted function against central differences of the next lower order"""
    rng = np.random.default_rng(seed)
    k = KernelModel(lengthscale=0.7)
    mset = MultiIndexSet.enumerate(1, 2)
    step = 1e-4
    worst = 0.0
    for _ in range(fits):
        N = int(rng.integers(4, 10))
        result = fit(build_gram(spaced_dataset(N, 1, mset, rng, spacing=1.0), k, mset), 0.5)
        points = rng.uniform(0.0, float(N), (5, 1))
        for order_ in (1, 2):
            analytic = evaluate(result, points, (order_,))
            numeric = (evaluate(result, points + step, (order_ - 1,)) - evaluate(result, points - step, (order_ - 1,))) / (2.0 * step)
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic)))))
    return _outcome("derivative reproducing property", worst, 1e-4 * tolerance_scale)


ORACLES: Tuple[Callable, ...] = (
    kernel_finite_differences,
    dense_vs_lowrank,
    nnls_enumeration,
    omega_feature_oracle,
    moreau_identity,
    chi_bar_scalar,
    reproducing_property,
)


def run_all(seed: int = 0, tolerance_scale: float = 1.0) -> List[OracleOutcome]:
    """Run every oracle; ``tolerance_scale`` multiplies all tolerances"""
    outcomes = []
    for oracle in ORACLES:
        result = oracle(seed=seed, tolerance_scale=tolerance_scale)
        outcomes.extend(result if isinstance(result, list) else [result])
    return outcomes
