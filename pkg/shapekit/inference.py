"""Shape test on a grid: plug-in covariance, Wald statistic and Monte Carlo calibration.

For a tested derivative ``alpha`` and grid points ``xi_1..xi_n`` the test compares
``theta_hat_j = D^alpha h(xi_j)`` with the non-negative orthant. The statistic is
the squared Mahalanobis distance (metric ``Omega_hat^-1``) from ``theta_hat`` to
the orthant, scaled by ``N``, computed as a non-negative least-squares problem.
Its null law at the least favorable point ``theta = 0`` is simulated directly.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np

from .assembly import GramSystem, GridSystem, build_grid, centering_matrix
from .const import FORMAT_VERSION, MC_CHUNK, MC_REPS, MC_REPS_MIN, NNLS_KKT_TOL, NONNEG_TOL, OMEGA_JITTER, TEST_DIRECTION, TEST_LEVELS, TEST_SEED
from .errors import DegenerateInferenceError, InputError, SolverError
from .estimator import FitResult
from .linalg import inv_sqrt_psd, nnls, orthant_distances, solve_spd, sqrt_psd
from .multiindex import to_string

Direction = Literal["nonneg", "nonpos"]


@dataclass(frozen=True)
class OmegaWorkspace:
    """Intermediate matrices of the covariance assembly; ``Omega = S^T S / N`` with ``S = (B - V^T Lambda) / lambda``"""

    Lambda: np.ndarray
    Bmat: np.ndarray
    Vmat: np.ndarray
    Smat: np.ndarray


def theta_hat(fit: FitResult, gridsys: GridSystem) -> np.ndarray:
    """Derivative of the fitted function at each grid point"""
    if gridsys.K_G.shape[0] != fit.c_hat.shape[0]:
        raise InputError(f"grid system has {gridsys.K_G.shape[0]} basis rows, the fit has {fit.c_hat.shape[0]} coefficients")
    return gridsys.K_G.T @ fit.c_hat


def omega_hat(sys: GramSystem, gridsys: GridSystem, fit: FitResult, lam: float = None) -> Tuple[np.ndarray, OmegaWorkspace]:
    """Plug-in covariance of ``sqrt(N) (theta_hat - theta)`` from Gram products only.

    Args:
        sys: the Gram system of the fit
        gridsys: grid system with ``h_tilde`` filled
        fit: the fit that produced ``h_tilde``
        lam: regularization; defaults to the fit's

    Returns:
        (Omega, OmegaWorkspace)
    """
    lam = fit.lam if lam is None else float(lam)
    if gridsys.h_tilde is None:
        raise InputError("the grid system has no fitted values; build it with the fit")
    if not lam > 0:
        raise DegenerateInferenceError("lambda must be positive for the covariance assembly")
    N = sys.N
    H = centering_matrix(N)
    G_c = H @ gridsys.G @ H
    try:
        Lam = H @ solve_spd(lam * np.eye(N) + G_c / N, gridsys.G_tilde_G) / N
    except SolverError as exc:
        raise DegenerateInferenceError(f"covariance assembly failed: {exc}") from exc
    h = gridsys.h_tilde
    ones = np.ones((N, 1))
    Bmat = (1.0 - h)[:, None] * gridsys.G_tilde_G + ones @ (h @ gridsys.G_tilde_G)[None, :] / N
    V_rows = (1.0 - h)[:, None] * gridsys.G_tilde + ones @ (h @ gridsys.G_tilde)[None, :] / N
    Vmat = V_rows.T
    Smat = (Bmat - Vmat.T @ Lam) / lam
    omega = Smat.T @ Smat / N
    omega = 0.5 * (omega + omega.T)
    if not np.all(np.isfinite(omega)):
        raise DegenerateInferenceError("the plug-in covariance has non-finite entries")
    return omega, OmegaWorkspace(Lambda=Lam, Bmat=Bmat, Vmat=Vmat, Smat=Smat)


@dataclass(frozen=True)
class WaldResult:
    W_N: float
    c_star: np.ndarray
    residual: np.ndarray
    kkt: float


def _signed(theta: np.ndarray, direction: Direction) -> np.ndarray:
    if direction == "nonneg":
        return np.asarray(theta, dtype=float)
    if direction == "nonpos":
        return -np.asarray(theta, dtype=float)
    raise InputError(f"Unknown test direction {direction!r}; expected nonneg or nonpos")


def _projection(R: np.ndarray, theta: np.ndarray, kkt_tol: float):
    if np.all(theta >= -NONNEG_TOL):
        c = np.maximum(theta, 0.0)
        return c, np.zeros_like(theta), 0.0, 0.0
    sol = nnls(R, R @ theta, kkt_tol=kkt_tol)
    return sol.c_star, sol.residual, sol.sq_norm, sol.kkt


def wald_statistic(
    theta: np.ndarray, omega: np.ndarray, N: int, direction: Direction = TEST_DIRECTION, jitter: float = OMEGA_JITTER, kkt_tol: float = NNLS_KKT_TOL
) -> WaldResult:
    """``W_N = N min_{c >= 0} (c - theta)^T Omega^-1 (c - theta)``.

    ``nonpos`` flips the sign of ``theta`` only. ``W_N`` is exactly zero when the
    signed ``theta`` lies in the orthant up to ``NONNEG_TOL``.
    """
    if N < 1:
        raise InputError("N must be at least 1")
    theta = _signed(np.atleast_1d(theta), direction)
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    if omega.shape != (theta.shape[0], theta.shape[0]):
        raise InputError(f"covariance has shape {omega.shape}, expected {theta.shape[0]} x {theta.shape[0]}")
    try:
        R = inv_sqrt_psd(omega, jitter)
        c_star, residual, sq_norm, kkt = _projection(R, theta, kkt_tol)
    except SolverError as exc:
        raise DegenerateInferenceError(f"Wald statistic could not be computed: {exc}") from exc
    return WaldResult(W_N=float(N * sq_norm), c_star=c_star, residual=residual, kkt=kkt)


@dataclass(frozen=True)
class NullDistribution:
    """Monte Carlo draws of the statistic at the least favorable null.

    Each draw ``Z_r ~ N(0, Omega)`` is projected onto the orthant in the metric
    ``Omega^-1``. Draws come in fixed chunks of ``MC_CHUNK``; chunk ``k`` uses the
    stream ``SeedSequence([seed, k])`` so the sample does not depend on the thread count.
    Draws already inside the orthant score zero without a solve.
    """

    samples: np.ndarray
    seed: int

    @classmethod
    def simulate(cls, omega: np.ndarray, reps: int = MC_REPS, seed: int = TEST_SEED, threads: int = 1, jitter: float = OMEGA_JITTER, kkt_tol: float = NNLS_KKT_TOL) -> "NullDistribution":
        if reps < MC_REPS_MIN:
            raise InputError(f"mc_reps must be at least {MC_REPS_MIN}, got {reps}")
        if seed < 0:
            raise InputError("seed must be non-negative")
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        try:
            root = sqrt_psd(omega)
            R = inv_sqrt_psd(omega, jitter)
        except SolverError as exc:
            raise DegenerateInferenceError(f"null distribution could not be simulated: {exc}") from exc
        P = R.T @ R
        n = omega.shape[0]

        def draw_chunk(chunk: int) -> np.ndarray:
            rng = np.random.default_rng(np.random.SeedSequence([seed, chunk]))
            Z = rng.standard_normal((min(MC_CHUNK, reps - chunk * MC_CHUNK), n)) @ root.T
            out = np.zeros(Z.shape[0])
            outside = ~np.all(Z >= -NONNEG_TOL, axis=1)
            if outside.any():
                out[outside] = orthant_distances(P, Z[outside], kkt_tol)
            return out

        chunks = range(-(-reps // MC_CHUNK))
        try:
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    parts = list(pool.map(draw_chunk, chunks))
            else:
                parts = [draw_chunk(chunk) for chunk in chunks]
        except SolverError as exc:
            raise DegenerateInferenceError(f"null distribution could not be simulated: {exc}") from exc
        samples = np.concatenate(parts)
        logging.debug("Simulated %d null draws (n=%d), %.3f at zero", reps, n, float(np.mean(samples == 0.0)))
        return cls(samples=samples, seed=seed)

    @property
    def reps(self) -> int:
        return self.samples.shape[0]

    def pvalue(self, W_obs: float) -> float:
        """``(1 + #{W_r >= W_obs}) / (reps + 1)``"""
        return float((1 + np.count_nonzero(self.samples >= W_obs)) / (self.reps + 1))

    def critical_value(self, level: float) -> float:
        """Empirical ``1 - level`` quantile of the draws"""
        if not 0.0 < level < 1.0:
            raise InputError(f"level must be in (0, 1), got {level}")
        return float(np.quantile(self.samples, 1.0 - level, method="higher"))

    def summary(self, levels: Sequence[float] = TEST_LEVELS) -> Dict:
        return {
            "reps": self.reps,
            "seed": self.seed,
            "mean": float(np.mean(self.samples)),
            "zero_fraction": float(np.mean(self.samples == 0.0)),
            "critical_values": {_level_key(level): self.critical_value(level) for level in levels},
        }


def _level_key(level: float) -> str:
    return f"{level:g}"


def pvalue_mc(omega: np.ndarray, W_obs: float, reps: int = MC_REPS, seed: int = TEST_SEED, threads: int = 1, jitter: float = OMEGA_JITTER) -> Tuple[float, Dict]:
    """Monte Carlo p-value of ``W_obs`` and a summary of the null draws"""
    null = NullDistribution.simulate(omega, reps=reps, seed=seed, threads=threads, jitter=jitter)
    return null.pvalue(W_obs), null.summary()


def moreau_check(Z: np.ndarray, omega: np.ndarray) -> Tuple[float, float]:
    """Both sides of ``|Z|^2 = |P Z|^2 + |Z - P Z|^2`` in the metric ``Omega^-1``, ``P`` the orthant projection"""
    Z = np.atleast_1d(np.asarray(Z, dtype=float))
    R = inv_sqrt_psd(omega, 0.0)
    proj = nnls(R, R @ Z).c_star
    lhs = float(np.sum((R @ Z) ** 2))
    rhs = float(np.sum((R @ proj) ** 2) + np.sum((R @ (Z - proj)) ** 2))
    return lhs, rhs


@dataclass(frozen=True)
class TestReport:
    """Everything a shape test produced"""

    __test__ = False

    grid: np.ndarray
    alpha_test: Tuple[int, ...]
    direction: str
    theta_hat: np.ndarray
    omega_hat: np.ndarray
    W_N: float
    c_star: np.ndarray
    kkt: float
    p_value: float
    mc_reps: int
    seed: int
    decision_at: Dict[str, bool]
    critical_values: Dict[str, float]
    null_summary: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "format_version": FORMAT_VERSION,
            "grid": self.grid.tolist(),
            "alpha_test": to_string(self.alpha_test),
            "direction": self.direction,
            "theta_hat": self.theta_hat.tolist(),
            "omega_hat": self.omega_hat.tolist(),
            "W_N": self.W_N,
            "c_star": self.c_star.tolist(),
            "kkt": self.kkt,
            "p_value": self.p_value,
            "mc_reps": self.mc_reps,
            "seed": self.seed,
            "critical_values": self.critical_values,
            "decision_at": self.decision_at,
            "null_summary": self.null_summary,
        }


def run_test(
    sys: GramSystem,
    fit: FitResult,
    grid: np.ndarray,
    alpha_test: Sequence[int],
    direction: Direction = TEST_DIRECTION,
    mc_reps: int = MC_REPS,
    seed: int = TEST_SEED,
    levels: Sequence[float] = TEST_LEVELS,
    threads: int = 1,
    jitter: float = OMEGA_JITTER,
    kkt_tol: float = NNLS_KKT_TOL,
    gridsys: Optional[GridSystem] = None,
) -> TestReport:
    """Test ``D^alpha h >= 0`` (or ``<= 0``) on the grid"""
    if gridsys is None:
        gridsys = build_grid(sys, grid, alpha_test, fit)
    theta = theta_hat(fit, gridsys)
    omega, _ = omega_hat(sys, gridsys, fit)
    wald = wald_statistic(theta, omega, sys.N, direction, jitter, kkt_tol)
    null = NullDistribution.simulate(omega, reps=mc_reps, seed=seed, threads=threads, jitter=jitter, kkt_tol=kkt_tol)
    p = null.pvalue(wald.W_N)
    logging.info("Shape test alpha=%s %s on %d points: W_N=%.6g p=%.4g", to_string(gridsys.alpha_test), direction, gridsys.n, wald.W_N, p)
    return TestReport(
        grid=gridsys.grid,
        alpha_test=gridsys.alpha_test,
        direction=direction,
        theta_hat=theta,
        omega_hat=omega,
        W_N=wald.W_N,
        c_star=wald.c_star,
        kkt=wald.kkt,
        p_value=p,
        mc_reps=mc_reps,
        seed=seed,
        decision_at={_level_key(level): bool(p <= level) for level in levels},
        critical_values={_level_key(level): null.critical_value(level) for level in levels},
        null_summary=null.summary(levels),
    )
