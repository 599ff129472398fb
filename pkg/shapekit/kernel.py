"""Kernels with exact mixed partial derivatives.

Every Gram entry of the estimator is an inner product of derivative sections,
``<phi^(a)(x), phi^(b)(y)> = D_x^a D_y^b K(x, y)``, so the kernel only needs to
supply those mixed partials.

The Gaussian kernel factorizes over coordinates. With ``r = (x - y) / l`` and
``He_n`` the probabilists' Hermite polynomials,

    d^n/dr^n exp(-r^2/2) = (-1)^n He_n(r) exp(-r^2/2)

and since ``d/dx = (1/l) d/dr`` and ``d/dy = -(1/l) d/dr`` each coordinate
contributes ``(-1)^a l^-(a+b) He_(a+b)(r)`` to the product.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Sequence, Tuple, Union

import numpy as np
from scipy.special import eval_hermitenorm

from .const import KERNEL_FAMILY, KERNEL_LENGTHSCALE, S_MAX
from .errors import InputError
from .multiindex import order

try:
    from typing import Protocol
except ImportError:  # pragma: no cover
    from typing_extensions import Protocol  # type: ignore

KernelFamily = Literal["gaussian"]


class Kernel(Protocol):
    """What assembly needs from a kernel"""

    s_max: int

    def deriv_matrix(self, a: Sequence[int], b: Sequence[int], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        ...


def _as_points(X, d: int = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        # a flat array is a column of scalar points unless it is one point in d > 1
        X = X.reshape(-1, 1) if d in (None, 1) else X.reshape(1, -1)
    if X.ndim != 2:
        raise InputError(f"points must be a 2-d array, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise InputError(f"dimension mismatch: points have {X.shape[1]} coordinates, expected {d}")
    return X


@dataclass(frozen=True)
class KernelModel:
    """Isotropic or per-coordinate Gaussian kernel ``exp(-sum_j (x_j - y_j)^2 / (2 l_j^2))``.

    Args:
        family: kernel family; only ``"gaussian"`` is available
        lengthscale: a positive scalar, or one positive value per coordinate
        s_max: largest one-sided derivative order served
    """

    family: KernelFamily = KERNEL_FAMILY
    lengthscale: Union[float, Tuple[float, ...]] = KERNEL_LENGTHSCALE
    s_max: int = S_MAX

    def __post_init__(self):
        if self.family != "gaussian":
            raise InputError(f"Unknown kernel family {self.family!r}; available: gaussian")
        if isinstance(self.lengthscale, (list, tuple, np.ndarray)):
            object.__setattr__(self, "lengthscale", tuple(float(v) for v in self.lengthscale))
            scales = self.lengthscale
        else:
            object.__setattr__(self, "lengthscale", float(self.lengthscale))
            scales = (self.lengthscale,)
        if not scales or not all(np.isfinite(v) and v > 0 for v in scales):
            raise InputError("kernel lengthscale must be positive")
        if self.s_max < 0:
            raise InputError("s_max must be non-negative")

    def scales(self, d: int) -> np.ndarray:
        """Lengthscale per coordinate for dimension ``d``"""
        if isinstance(self.lengthscale, tuple):
            if len(self.lengthscale) != d:
                raise InputError(f"kernel has {len(self.lengthscale)} lengthscales but the data has dimension {d}")
            return np.asarray(self.lengthscale)
        return np.full(d, self.lengthscale)

    def _check_orders(self, a, b, d: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        a = tuple(int(v) for v in a)
        b = tuple(int(v) for v in b)
        if len(a) != d or len(b) != d:
            raise InputError(f"dimension mismatch: multi-indices {a} and {b} for points of dimension {d}")
        if min(a + b) < 0:
            raise InputError("multi-index entries must be non-negative")
        if order(a) > self.s_max or order(b) > self.s_max:
            raise InputError(f"derivative order exceeds the supported maximum {self.s_max}: a={a}, b={b}")
        return a, b

    def deriv_matrix(self, a: Sequence[int], b: Sequence[int], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """``D_x^a D_y^b K(x_p, y_q)`` for every row ``x_p`` of X and ``y_q`` of Y.

        Args:
            a: multi-index acting on the first argument
            b: multi-index acting on the second argument
            X: P x d points
            Y: Q x d points

        Returns:
            P x Q matrix
        """
        X = _as_points(X)
        Y = _as_points(Y, X.shape[1])
        d = X.shape[1]
        a, b = self._check_orders(a, b, d)
        scale = self.scales(d)
        R = (X[:, None, :] - Y[None, :, :]) / scale
        out = np.exp(-0.5 * np.sum(R * R, axis=2))
        for j in range(d):
            n = a[j] + b[j]
            if n == 0:
                continue
            sign = -1.0 if a[j] % 2 else 1.0
            out = out * (sign * scale[j] ** (-n)) * eval_hermitenorm(n, R[:, :, j])
        if not np.all(np.isfinite(out)):
            raise InputError("non-finite kernel value; check the inputs and the lengthscale")
        return out


def eval_deriv(k: Kernel, a: Sequence[int], b: Sequence[int], x, y) -> float:
    """Single mixed partial ``D_x^a D_y^b K(x, y)``"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"dimension mismatch: x has shape {x.shape}, y has shape {y.shape}")
    return float(k.deriv_matrix(a, b, x.reshape(1, -1), y.reshape(1, -1))[0, 0])


def fd_check(k: Kernel, a: Sequence[int], b: Sequence[int], x, y, step: float = 1e-3) -> Tuple[float, float, float]:
    """Compare an analytic mixed partial with a central difference.

    The numeric value differences the analytic partial one order lower along the
    first coordinate that carries an order (of ``a`` first, then ``b``). Chained
    over orders this checks every partial against the kernel itself.

    Returns:
        (analytic, numeric, rel_err) with ``rel_err = |analytic - numeric| / max(1, |analytic|)``
    """
    if not step > 0:
        raise InputError("finite-difference step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a = tuple(int(v) for v in a)
    b = tuple(int(v) for v in b)
    analytic = eval_deriv(k, a, b, x, y)
    if order(a) + order(b) == 0:
        return analytic, analytic, 0.0
    if order(a) > 0:
        j = next(i for i, v in enumerate(a) if v > 0)
        lower = tuple(v - 1 if i == j else v for i, v in enumerate(a))
        e = np.zeros_like(x)
        e[j] = step
        numeric = (eval_deriv(k, lower, b, x + e, y) - eval_deriv(k, lower, b, x - e, y)) / (2.0 * step)
    else:
        j = next(i for i, v in enumerate(b) if v > 0)
        lower = tuple(v - 1 if i == j else v for i, v in enumerate(b))
        e = np.zeros_like(y)
        e[j] = step
        numeric = (eval_deriv(k, a, lower, x, y + e) - eval_deriv(k, a, lower, x, y - e)) / (2.0 * step)
    rel_err = abs(analytic - numeric) / max(1.0, abs(analytic))
    logging.debug("fd_check a=%s b=%s analytic=%.6g numeric=%.6g rel_err=%.3g", a, b, analytic, numeric, rel_err)
    return analytic, numeric, rel_err
