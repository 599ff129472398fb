"""Assemble the matrices of the estimator and of the test from data.

The representer basis is ``{phi^(a)(x_i)}`` over samples ``i`` and active
multi-indices ``a``, laid out multi-index-major. With ``M = N * m`` basis
elements (``m`` active multi-indices):

- ``K`` (M x M): ``K[(i,a),(j,b)] = D_x^a D_y^b K(x_i, x_j)``
- ``A`` (M x N): block ``a`` is ``diag(W[:, a])``; column ``i`` holds the
  coordinates of the score functional ``psi_i``
- ``a_bar``: row mean of ``A``; ``Sigma``: centered covariance of the columns of ``A``

On a grid of ``n`` test points and test multi-index ``alpha``:

- ``K_G`` (M x n): ``K_G[(i,b), j] = D_x^b D_y^alpha K(x_i, xi_j)``
- ``G = A^T K A``, ``G_tilde = H G``, ``G_tilde_G = H A^T K_G`` with ``H`` the centering matrix
- ``h_tilde = H A^T K c_hat`` once a fit is available
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from .const import GRAM_JITTER, TOL_PSD
from .errors import InputError, NotPsdError
from .kernel import Kernel
from .multiindex import ActiveSet, MultiIndex, MultiIndexSet, order, to_string


@dataclass(frozen=True)
class Dataset:
    """Covariates, weights and an optional response.

    Args:
        X: N x d covariates
        W: N x m_s weights; column ``a`` holds ``w_alpha(z_i)`` for the a-th multi-index
        Y: optional length-N response
    """

    X: np.ndarray
    W: np.ndarray
    Y: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InputError("covariates must be a non-empty N x d matrix")
        if W.ndim != 2 or W.shape[0] != X.shape[0]:
            raise InputError(f"weights must have {X.shape[0]} rows, got shape {W.shape}")
        if not np.all(np.isfinite(X)):
            row = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise InputError(f"non-finite covariate in row {row}")
        if not np.all(np.isfinite(W)):
            row = int(np.argwhere(~np.isfinite(W))[0, 0])
            raise InputError(f"non-finite weight in row {row}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", W)
        if self.Y is not None:
            Y = np.asarray(self.Y, dtype=float).reshape(-1)
            if Y.shape[0] != X.shape[0]:
                raise InputError(f"response must have {X.shape[0]} entries, got {Y.shape[0]}")
            if not np.all(np.isfinite(Y)):
                raise InputError(f"non-finite response in row {int(np.argwhere(~np.isfinite(Y))[0, 0])}")
            object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Basis:
    """The derivative sections spanning the estimator: sample points, kernel and active multi-indices"""

    X: np.ndarray
    kernel: Kernel
    mset: MultiIndexSet
    indices: Tuple[MultiIndex, ...]

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def M(self) -> int:
        return self.N * len(self.indices)

    def labels(self):
        return [to_string(alpha) for alpha in self.indices]

    def cross(self, points: np.ndarray, alpha: Sequence[int]) -> np.ndarray:
        """M x P matrix ``D_x^b D_y^alpha K(x_i, p)`` for every basis element ``(i, b)`` and point ``p``"""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if self.mset.d == 1 else points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.mset.d:
            raise InputError(f"dimension mismatch: points have shape {points.shape}, expected P x {self.mset.d}")
        alpha = tuple(int(v) for v in alpha)
        if len(alpha) != self.mset.d:
            raise InputError(f"multi-index {alpha} does not match dimension {self.mset.d}")
        if order(alpha) > self.mset.s:
            raise InputError(f"derivative order |alpha|={order(alpha)} exceeds s={self.mset.s}")
        return np.vstack([self.kernel.deriv_matrix(b, alpha, self.X, points) for b in self.indices])

    def column(self, k: int) -> np.ndarray:
        """Column ``k`` of the basis Gram matrix, computed on demand"""
        p, i = divmod(k, self.N)
        xi = self.X[i : i + 1]
        return np.concatenate([self.kernel.deriv_matrix(b, self.indices[p], self.X, xi)[:, 0] for b in self.indices])

    def diagonal(self) -> np.ndarray:
        parts = []
        for a in self.indices:
            parts.append(np.array([self.kernel.deriv_matrix(a, a, self.X[i : i + 1], self.X[i : i + 1])[0, 0] for i in range(self.N)]))
        return np.concatenate(parts)


class GramAccessor:
    """Column access to the basis Gram matrix without forming it.

    Accepted by :py:func:`shapekit.linalg.pivoted_cholesky` in place of a dense matrix.
    """

    def __init__(self, basis: Basis):
        self.basis = basis
        self.shape = (basis.M, basis.M)
        self._diag = None

    def diagonal(self) -> np.ndarray:
        if self._diag is None:
            self._diag = self.basis.diagonal()
        return self._diag

    def column(self, k: int) -> np.ndarray:
        return self.basis.column(k)


@dataclass(frozen=True)
class GramSystem:
    """Matrices of the empirical mean-variance problem"""

    K: np.ndarray
    A: np.ndarray
    a_bar: np.ndarray
    Sigma: np.ndarray
    N: int
    basis: Basis
    jitter: float = 0.0

    @property
    def M(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class GridSystem:
    """Grid quantities of the shape test; ``h_tilde`` is set once a fit is available"""

    grid: np.ndarray
    alpha_test: MultiIndex
    K_G: np.ndarray
    G: np.ndarray
    G_tilde: np.ndarray
    G_tilde_G: np.ndarray
    h_tilde: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.grid.shape[0]


def centering_matrix(N: int) -> np.ndarray:
    """``H = I - 1 1^T / N``"""
    return np.eye(N) - np.full((N, N), 1.0 / N)


def coefficient_blocks(W: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Stack ``diag(W[:, a])`` for each active position into the M x N matrix A"""
    return np.vstack([np.diag(W[:, a]) for a in positions])


def _min_eig(K: np.ndarray) -> float:
    return float(eigvalsh(K, subset_by_index=[0, 0])[0])


def validate_psd(K: np.ndarray, tol_psd: float = TOL_PSD, jitter: float = GRAM_JITTER) -> Tuple[np.ndarray, float]:
    """Check ``min eig(K) >= -tol_psd * trace(K) / M``, adding diagonal jitter once if the check fails.

    Returns:
        the (possibly jittered) matrix and the jitter added
    """
    M = K.shape[0]
    scale = max(float(np.trace(K)), 0.0) / M
    floor = -tol_psd * scale
    lam_min = _min_eig(K)
    if lam_min >= floor:
        return K, 0.0
    added = jitter * scale
    logging.warning("Gram matrix failed the PSD check (min eigenvalue %.3g < %.3g); adding jitter %.3g", lam_min, floor, added)
    K = K + added * np.eye(M)
    lam_min = _min_eig(K)
    if lam_min < floor:
        raise NotPsdError(f"Gram matrix is not positive semidefinite after jitter (min eigenvalue {lam_min:.3g}); check the lengthscale and duplicated points")
    return K, added


def build_gram(data: Dataset, k: Kernel, mset: MultiIndexSet, active: Optional[ActiveSet] = None, tol_psd: float = TOL_PSD, jitter: float = GRAM_JITTER) -> GramSystem:
    """Assemble ``K``, ``A``, ``a_bar`` and the centered ``Sigma``.

    Args:
        data: the sample
        k: kernel providing mixed partials
        mset: multi-index set whose size matches the weight columns
        active: positions kept in the basis; defaults to the columns with a non-zero weight

    Returns:
        GramSystem over ``M = N * len(active)`` basis elements
    """
    if data.W.shape[1] != mset.m_s:
        raise InputError(f"weight matrix has {data.W.shape[1]} columns, expected m_s={mset.m_s}")
    if data.d != mset.d:
        raise InputError(f"data has dimension {data.d}, multi-index set has dimension {mset.d}")
    if active is None:
        active = ActiveSet.from_weights(mset, data.W)
    positions = active.positions
    indices = tuple(mset[a] for a in positions)
    N = data.N
    X = data.X

    m = len(indices)
    K = np.empty((m * N, m * N))
    for p in range(m):
        for q in range(p, m):
            block = k.deriv_matrix(indices[p], indices[q], X, X)
            K[p * N : (p + 1) * N, q * N : (q + 1) * N] = block
            if q != p:
                K[q * N : (q + 1) * N, p * N : (p + 1) * N] = block.T
    K = np.triu(K) + np.triu(K, 1).T
    if not np.all(np.isfinite(K)):
        raise InputError("non-finite kernel value in the Gram matrix")
    K, added = validate_psd(K, tol_psd, jitter)

    A = coefficient_blocks(data.W, positions)
    a_bar = A.mean(axis=1)
    A_c = A - a_bar[:, None]
    Sigma = A_c @ A_c.T / N
    Sigma = 0.5 * (Sigma + Sigma.T)
    logging.debug("Assembled Gram system N=%d, active=%s, M=%d", N, [to_string(a) for a in indices], K.shape[0])
    return GramSystem(K=K, A=A, a_bar=a_bar, Sigma=Sigma, N=N, basis=Basis(X=X, kernel=k, mset=mset, indices=indices), jitter=added)


def build_grid(sys: GramSystem, grid: np.ndarray, alpha_test: Sequence[int], fit=None) -> GridSystem:
    """Assemble the grid quantities of the test at ``alpha_test``.

    Args:
        sys: Gram system built from the same data
        grid: n x d test points
        alpha_test: derivative tested on the grid, ``|alpha_test| <= s``
        fit: optional :py:class:`shapekit.estimator.FitResult`; when given ``h_tilde`` is filled

    Returns:
        GridSystem
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid.reshape(-1, 1) if sys.basis.mset.d == 1 else grid.reshape(1, -1)
    if grid.size == 0 or grid.shape[0] < 1:
        raise InputError("the test grid is empty")
    if not np.all(np.isfinite(grid)):
        raise InputError("the test grid has non-finite coordinates")
    alpha_test = tuple(int(v) for v in alpha_test)
    K_G = sys.basis.cross(grid, alpha_test)
    H = centering_matrix(sys.N)
    G = sys.A.T @ sys.K @ sys.A
    G = 0.5 * (G + G.T)
    gridsys = GridSystem(grid=grid, alpha_test=alpha_test, K_G=K_G, G=G, G_tilde=H @ G, G_tilde_G=H @ (sys.A.T @ K_G))
    if fit is not None:
        gridsys = with_fit(gridsys, sys, fit)
    return gridsys


def with_fit(gridsys: GridSystem, sys: GramSystem, fit) -> GridSystem:
    """Fill ``h_tilde = H A^T K c_hat``"""
    c_hat = np.asarray(fit.c_hat)
    if c_hat.shape[0] != sys.M:
        raise InputError(f"fit has {c_hat.shape[0]} coefficients, the Gram system has M={sys.M}")
    h = sys.A.T @ (sys.K @ c_hat)
    return replace(gridsys, h_tilde=h - h.mean())
