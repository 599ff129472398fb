"""Dense numerical building blocks: pivoted Cholesky, SPD solves, matrix roots and NNLS."""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh, lstsq, solve_triangular

from .const import MAX_RANK, NNLS_ITER_FACTOR, NNLS_KKT_TOL, OMEGA_JITTER, RANK_TOL, SOLVE_JITTER, SOLVE_JITTER_TRIES, TOL_PSD
from .errors import InputError, NotPsdError, SolverError


class DenseAccessor:
    """Column access to a dense symmetric matrix"""

    def __init__(self, K: np.ndarray):
        K = np.asarray(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise InputError(f"expected a square matrix, got shape {K.shape}")
        self.K = K
        self.shape = K.shape

    def diagonal(self) -> np.ndarray:
        return np.diag(self.K).copy()

    def column(self, k: int) -> np.ndarray:
        return self.K[:, k]


@dataclass(frozen=True)
class PivotedCholesky:
    """``K ~ L L^T`` with pivot rows and the biorthogonal factor ``B`` (``B^T L = I``, ``K B = L``)"""

    L: np.ndarray
    pivots: Tuple[int, ...]
    B: np.ndarray
    trace_residual: float
    truncated: bool = False

    @property
    def rank(self) -> int:
        return len(self.pivots)


def pivoted_cholesky(K, rank_tol: float = RANK_TOL, max_rank: int = MAX_RANK, tol_psd: float = TOL_PSD) -> PivotedCholesky:
    """Greedy largest-diagonal pivoted Cholesky factorization.

    Args:
        K: symmetric PSD matrix, or an accessor exposing ``shape``, ``diagonal()`` and ``column(k)``
        rank_tol: stop once the residual trace is at most ``rank_tol * trace(K)``
        max_rank: stop after this many pivots; the result is then flagged as truncated if the tolerance was not met
        tol_psd: relative tolerance for a negative pivot

    Returns:
        PivotedCholesky
    """
    acc = DenseAccessor(K) if isinstance(K, np.ndarray) else K
    M = acc.shape[0]
    diag = np.array(acc.diagonal(), dtype=float)
    trace = float(np.sum(diag))
    if np.min(diag, initial=0.0) < -tol_psd * max(trace, 0.0) / max(M, 1):
        raise NotPsdError(f"negative diagonal entry {np.min(diag):.3g} in a matrix expected to be PSD")
    max_rank = min(int(max_rank), M)
    target = rank_tol * trace
    cols = []
    pivots = []
    residual = max(trace, 0.0)
    while residual > target and len(pivots) < max_rank:
        p = int(np.argmax(diag))
        pivot = diag[p]
        if pivot < -tol_psd * trace / M:
            raise NotPsdError(f"negative pivot {pivot:.3g} at index {p}: matrix is not PSD")
        if pivot <= 0.0:
            break
        col = np.array(acc.column(p), dtype=float)
        if cols:
            Lm = np.column_stack(cols)
            col = col - Lm @ Lm[p]
        col = col / np.sqrt(pivot)
        col[pivots] = 0.0
        col[p] = np.sqrt(pivot)
        cols.append(col)
        pivots.append(p)
        diag = diag - col * col
        diag[pivots] = 0.0
        residual = max(float(np.sum(diag)), 0.0)
    m = len(pivots)
    L = np.column_stack(cols) if cols else np.zeros((M, 0))
    B = np.zeros((M, m))
    if m:
        P = L[pivots, :]
        B[pivots, :] = solve_triangular(P, np.eye(m), lower=True).T
    truncated = residual > target and m == max_rank and m < M
    if truncated:
        logging.warning("Pivoted Cholesky stopped at max_rank=%d with residual trace %.3g above %.3g", m, residual, target)
    logging.debug("Pivoted Cholesky rank %d of %d, residual trace %.3g", m, M, residual)
    return PivotedCholesky(L=L, pivots=tuple(pivots), B=B, trace_residual=residual, truncated=truncated)


def cholesky_jittered(M: np.ndarray, jitter: float = SOLVE_JITTER, tries: int = SOLVE_JITTER_TRIES):
    """Cholesky factor of a symmetric matrix, adding growing diagonal jitter until it is positive definite.

    Returns:
        (cho_factor result, jitter added)
    """
    M = 0.5 * (M + M.T)
    scale = max(float(np.trace(M)) / M.shape[0], np.finfo(float).tiny)
    added = 0.0
    for attempt in range(tries + 1):
        try:
            factor = cho_factor(M + added * np.eye(M.shape[0]), lower=True)
            if added:
                logging.warning("Added jitter %.3g to the diagonal of a %d x %d system", added, M.shape[0], M.shape[1])
            return factor, added
        except LinAlgError:
            added = jitter * scale * 10.0**attempt
    raise SolverError(f"matrix of size {M.shape[0]} is not positive definite after jitter {added:.3g}")


def solve_spd(M: np.ndarray, rhs: np.ndarray, jitter: float = SOLVE_JITTER, tries: int = SOLVE_JITTER_TRIES) -> np.ndarray:
    """Solve ``M x = rhs`` for symmetric positive definite ``M`` by Cholesky"""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    factor, _ = cholesky_jittered(M, jitter, tries)
    return cho_solve(factor, np.asarray(rhs, dtype=float))


def _eig_psd(M: np.ndarray):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    return eigh(0.5 * (M + M.T))


def inv_sqrt_psd(M: np.ndarray, jitter: float = OMEGA_JITTER) -> np.ndarray:
    """Symmetric inverse square root with eigenvalues clipped at ``jitter * max_eig`` from below"""
    w, V = _eig_psd(M)
    top = float(w[-1]) if w.size else 0.0
    if top <= 0.0:
        raise SolverError("matrix has no positive eigenvalue; its inverse square root is undefined")
    floor = jitter * top
    clipped = w < floor
    if np.any(clipped):
        logging.warning("Clipped %d of %d eigenvalues below %.3g (smallest %.3g)", int(clipped.sum()), w.size, floor, float(w[0]))
    w = np.maximum(w, floor)
    return (V / np.sqrt(w)) @ V.T


def sqrt_psd(M: np.ndarray) -> np.ndarray:
    """Symmetric square root; negative roundoff eigenvalues are set to zero"""
    w, V = _eig_psd(M)
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T


@dataclass(frozen=True)
class NnlsSolution:
    c_star: np.ndarray
    residual: np.ndarray
    sq_norm: float
    iterations: int
    kkt: float


def nnls(D: np.ndarray, b: np.ndarray, kkt_tol: float = NNLS_KKT_TOL, max_iter: int = None) -> NnlsSolution:
    """Lawson-Hanson active-set solution of ``min_{c >= 0} ||D c - b||^2``.

    Args:
        D: matrix with full column rank
        b: right-hand side
        kkt_tol: dual feasibility tolerance, relative to ``max(1, ||D^T b||_inf)``
        max_iter: cap on active-set changes, default ``10 * n``

    Returns:
        NnlsSolution whose ``residual`` is ``D c* - b``
    """
    D = np.asarray(D, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if D.ndim != 2 or D.shape[0] != b.shape[0]:
        raise InputError(f"shape mismatch: D is {D.shape}, b has {b.shape[0]} entries")
    n = D.shape[1]
    max_iter = NNLS_ITER_FACTOR * max(n, 1) if max_iter is None else max_iter
    tol = kkt_tol * max(1.0, float(np.max(np.abs(D.T @ b), initial=0.0)))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    iterations = 0
    while True:
        w = D.T @ (b - D @ x)
        if passive.all() or np.max(w[~passive]) <= tol:
            break
        iterations += 1
        if iterations > max_iter:
            raise SolverError(f"NNLS exceeded {max_iter} iterations; the design matrix is likely degenerate")
        j = int(np.flatnonzero(~passive)[np.argmax(w[~passive])])
        passive[j] = True
        while True:
            z = np.zeros(n)
            z[passive] = lstsq(D[:, passive], b)[0]
            if np.min(z[passive]) > 0.0:
                x = z
                break
            iterations += 1
            if iterations > max_iter:
                raise SolverError(f"NNLS exceeded {max_iter} iterations; the design matrix is likely degenerate")
            step = x - z
            blocking = passive & (z <= 0.0) & (step > 0.0)
            if blocking.any():
                ratios = np.where(blocking, x / np.where(blocking, step, 1.0), np.inf)
                k = int(np.argmin(ratios))
                x = x + ratios[k] * (z - x)
                x[k] = 0.0
            # a passive entry with z == x == 0 leaves through the mask below
            passive &= x > 0.0
            x[~passive] = 0.0

    residual = D @ x - b
    g = D.T @ residual
    kkt = float(np.max(np.abs(np.minimum(x, g)), initial=0.0))
    logging.debug("NNLS converged in %d iterations, %d active, kkt %.3g", iterations, int(passive.sum()), kkt)
    return NnlsSolution(c_star=x, residual=residual, sq_norm=float(residual @ residual), iterations=iterations, kkt=kkt)


def _passive_solve(P: np.ndarray, Q: np.ndarray, passive: np.ndarray) -> np.ndarray:
    """Rows of ``P[S, S] c_S = Q[S]`` for each row's passive set ``S``, with ``c = 0`` off ``S``"""
    n = P.shape[0]
    A = np.where(passive[:, :, None] & passive[:, None, :], P, 0.0)
    diag = np.arange(n)
    A[:, diag, diag] += ~passive
    try:
        return np.linalg.solve(A, np.where(passive, Q, 0.0)[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular passive-set system: {exc}") from exc


def orthant_distances(P: np.ndarray, Z: np.ndarray, kkt_tol: float = NNLS_KKT_TOL, max_iter: int = None) -> np.ndarray:
    """``min_{c >= 0} (z - c)^T P (z - c)`` for every row ``z`` of ``Z``.

    The Lawson-Hanson iteration of :py:func:`nnls` run on the normal equations of all
    rows at once: each step is one batched solve over every row's passive set.

    Args:
        P: symmetric positive definite metric, n x n
        Z: m x n points
        kkt_tol: dual feasibility tolerance, relative to ``max(1, ||P z||_inf)`` per row
        max_iter: cap on outer iterations, default ``10 * n``

    Returns:
        length-m vector of squared distances to the non-negative orthant
    """
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + P.T)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    m, n = Z.shape
    if P.shape != (n, n):
        raise InputError(f"shape mismatch: metric is {P.shape}, points have {n} coordinates")
    max_iter = NNLS_ITER_FACTOR * max(n, 1) if max_iter is None else max_iter
    Q = Z @ P
    tol = kkt_tol * np.maximum(1.0, np.max(np.abs(Q), axis=1, initial=0.0))
    X = np.zeros((m, n))
    passive = np.zeros((m, n), dtype=bool)
    live = np.arange(m)
    for _ in range(max_iter + 1):
        W = Q[live] - X[live] @ P
        W[passive[live]] = -np.inf
        j = np.argmax(W, axis=1)
        grow = W[np.arange(live.size), j] > tol[live]
        live, j = live[grow], j[grow]
        if live.size == 0:
            break
        passive[live, j] = True
        rows = live
        for _ in range(n + 1):
            z = _passive_solve(P, Q[rows], passive[rows])
            feasible = np.all(~passive[rows] | (z > 0.0), axis=1)
            X[rows[feasible]] = z[feasible]
            rows, z = rows[~feasible], z[~feasible]
            if rows.size == 0:
                break
            x, p = X[rows], passive[rows]
            step = x - z
            blocking = p & (z <= 0.0) & (step > 0.0)
            ratios = np.where(blocking, x / np.where(blocking, step, 1.0), np.inf)
            k = np.argmin(ratios, axis=1)
            alpha = ratios[np.arange(rows.size), k]
            moved = np.isfinite(alpha)
            x = x + np.where(moved, alpha, 0.0)[:, None] * (z - x)
            x[np.flatnonzero(moved), k[moved]] = 0.0
            p &= x > 0.0
            x[~p] = 0.0
            X[rows], passive[rows] = x, p
    else:
        raise SolverError(f"NNLS exceeded {max_iter} iterations on {live.size} of {m} rows; the metric is likely degenerate")
    D = Z - X
    return np.einsum("ij,jk,ik->i", D, P, D)
