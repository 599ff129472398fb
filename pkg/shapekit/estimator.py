"""Fit the regularized mean-variance estimator.

The fitted function is ``h = sum_k c_k phi_k`` over the representer basis of
:py:mod:`shapekit.assembly`. Its coefficients minimize

    -c^T K a_bar + 1/2 c^T K Sigma K c + lambda/2 c^T K c

whose first-order condition is ``(K Sigma K + lambda K) c = K a_bar``.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .assembly import Basis, GramSystem, GridSystem
from .const import DENSE_MAX_M, FO_TOL, MAX_RANK, RANK_TOL
from .errors import InputError, SolverError
from .linalg import PivotedCholesky, cholesky_jittered, pivoted_cholesky, solve_spd

SolverPath = Literal["dense", "lowrank", "auto"]


@dataclass(frozen=True)
class FitResult:
    """Coefficients of the fitted function and the diagnostics of the solve"""

    c_hat: np.ndarray
    lam: float
    path: str
    rank_used: int
    objective: float
    residual: float
    mean_score: float
    variance: float
    norm_sq: float
    basis: Basis
    truncated: bool = False
    jitter: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "lambda": self.lam,
            "path": self.path,
            "rank_used": self.rank_used,
            "M": int(self.c_hat.shape[0]),
            "N": self.basis.N,
            "multi_indices": self.basis.labels(),
            "objective": self.objective,
            "mean_score": self.mean_score,
            "variance": self.variance,
            "norm_sq": self.norm_sq,
            "residual": self.residual,
            "truncated": self.truncated,
            "jitter": self.jitter,
            "c_hat": self.c_hat.tolist(),
        }


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise InputError("lambda must be positive")
    return lam


def objective(fit_or_c, sys: GramSystem, lam: float = None) -> float:
    """Empirical mean-variance objective of a coefficient vector.

    Accepts a :py:class:`FitResult` (its own lambda is used) or a raw coefficient vector with ``lam``.
    """
    if isinstance(fit_or_c, FitResult):
        c, lam = fit_or_c.c_hat, fit_or_c.lam if lam is None else lam
    else:
        c = np.asarray(fit_or_c, dtype=float)
    Kc = sys.K @ c
    return float(-Kc @ sys.a_bar + 0.5 * Kc @ sys.Sigma @ Kc + 0.5 * lam * c @ Kc)


def first_order_residual(sys: GramSystem, c: np.ndarray, lam: float) -> float:
    """``||(K Sigma K + lambda K) c - K a_bar||_inf`` relative to ``1 + ||K a_bar||_inf``"""
    Kc = sys.K @ c
    Ka = sys.K @ sys.a_bar
    r = sys.K @ (sys.Sigma @ Kc) + lam * Kc - Ka
    return float(np.max(np.abs(r), initial=0.0) / (1.0 + np.max(np.abs(Ka), initial=0.0)))


def _result(sys: GramSystem, c: np.ndarray, lam: float, path: str, rank: int, fo_tol: float, truncated: bool = False, jitter: float = 0.0) -> FitResult:
    if not np.all(np.isfinite(c)):
        raise SolverError(f"{path} solve produced non-finite coefficients (lambda={lam:g})")
    Kc = sys.K @ c
    mean_score = float(Kc @ sys.a_bar)
    variance = float(Kc @ sys.Sigma @ Kc)
    norm_sq = float(c @ Kc)
    residual = first_order_residual(sys, c, lam)
    if path == "dense" and residual > fo_tol:
        logging.warning("First-order residual %.3g exceeds %.3g (lambda=%g)", residual, fo_tol, lam)
    logging.info("Fitted %s path, lambda=%g, rank=%d, objective=%.6g", path, lam, rank, -mean_score + 0.5 * variance + 0.5 * lam * norm_sq)
    return FitResult(
        c_hat=c,
        lam=lam,
        path=path,
        rank_used=rank,
        objective=-mean_score + 0.5 * variance + 0.5 * lam * norm_sq,
        residual=residual,
        mean_score=mean_score,
        variance=variance,
        norm_sq=norm_sq,
        basis=sys.basis,
        truncated=truncated,
        jitter=jitter,
    )


def fit_dense(sys: GramSystem, lam: float, fo_tol: float = FO_TOL) -> FitResult:
    """Solve the first-order condition through ``K = L L^T``.

    With ``c = L^-T v`` the system becomes ``(L^T Sigma L + lambda I) v = L^T a_bar``.
    """
    lam = _check_lambda(lam)
    (Lk, _), jitter = cholesky_jittered(sys.K)
    L = np.tril(Lk)
    v = solve_spd(L.T @ sys.Sigma @ L + lam * np.eye(sys.M), L.T @ sys.a_bar)
    c = solve_triangular(L, v, lower=True, trans="T")
    return _result(sys, c, lam, "dense", sys.M, fo_tol, jitter=jitter)


def fit_lowrank(sys: GramSystem, pc: PivotedCholesky, lam: float, fo_tol: float = FO_TOL) -> FitResult:
    """Solve the reduced system ``(L^T Sigma L + lambda I) c~ = L^T a_bar`` and map back with ``c = B c~``"""
    lam = _check_lambda(lam)
    if pc.L.shape[0] != sys.M:
        raise InputError(f"factorization has {pc.L.shape[0]} rows, the Gram system has M={sys.M}")
    if pc.rank == 0:
        logging.warning("Gram matrix has numerical rank 0; the fitted function is zero")
        return _result(sys, np.zeros(sys.M), lam, "lowrank", 0, fo_tol, truncated=pc.truncated)
    L = pc.L
    c_tilde = solve_spd(L.T @ sys.Sigma @ L + lam * np.eye(pc.rank), L.T @ sys.a_bar)
    return _result(sys, pc.B @ c_tilde, lam, "lowrank", pc.rank, fo_tol, truncated=pc.truncated)


def fit(
    sys: GramSystem,
    lam: float,
    path: SolverPath = "auto",
    rank_tol: float = RANK_TOL,
    max_rank: int = MAX_RANK,
    fo_tol: float = FO_TOL,
    dense_max_m: int = DENSE_MAX_M,
) -> FitResult:
    """Fit by the requested path; ``auto`` is dense iff ``M <= dense_max_m``"""
    if path not in ("dense", "lowrank", "auto"):
        raise InputError(f"Unknown solver path {path!r}; expected dense, lowrank or auto")
    if path == "auto":
        path = "dense" if sys.M <= dense_max_m else "lowrank"
    if path == "dense":
        return fit_dense(sys, lam, fo_tol)
    pc = pivoted_cholesky(sys.K, rank_tol=rank_tol, max_rank=max_rank)
    return fit_lowrank(sys, pc, lam, fo_tol)


def evaluate(fit_result: FitResult, points: np.ndarray, alpha: Sequence[int]) -> np.ndarray:
    """``D^alpha h(p) = sum_{i,b} c_(i,b) D_x^b D_y^alpha K(x_i, p)`` at every point"""
    return fit_result.basis.cross(points, alpha).T @ fit_result.c_hat


@dataclass(frozen=True)
class LambdaPathRow:
    lam: float
    objective: float
    mean_score: float
    variance: float
    norm_sq: float
    theta_hat: Optional[np.ndarray] = None
    theta_change: Optional[float] = None


def lambda_path(sys: GramSystem, lambdas: Sequence[float], path: SolverPath = "auto", gridsys: GridSystem = None, **kwargs) -> List[LambdaPathRow]:
    """Fit every lambda and report the objective terms.

    When ``gridsys`` is given, each row also carries the grid evaluations and their
    sup-norm change from the previous lambda. Nothing is selected.
    """
    rows = []
    previous = None
    for lam in lambdas:
        result = fit(sys, lam, path=path, **kwargs)
        theta = change = None
        if gridsys is not None:
            theta = gridsys.K_G.T @ result.c_hat
            change = None if previous is None else float(np.max(np.abs(theta - previous)))
            previous = theta
        rows.append(LambdaPathRow(result.lam, result.objective, result.mean_score, result.variance, result.norm_sq, theta, change))
    return rows
