"""Derivative multi-indices and the flat layout of the representer basis.

A multi-index ``alpha`` is a tuple of ``d`` non-negative integers naming the
mixed partial derivative D^alpha. The set of all multi-indices of total order
at most ``s`` is enumerated graded (total order ascending) and, within one
degree, in descending lexicographic order, e.g. for ``d=2, s=2``::

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2)

The basis of the estimator stacks all ``N`` samples of one multi-index before
moving to the next (multi-index-major blocks).
"""

from dataclasses import dataclass
from itertools import product
from math import comb
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from .const import S_MAX
from .errors import InputError

MultiIndex = Tuple[int, ...]


def order(alpha: Sequence[int]) -> int:
    """Total order |alpha|"""
    return int(sum(alpha))


def to_string(alpha: Sequence[int]) -> str:
    """Dot-separated form used in CSV headers and config, e.g. ``(1, 0) -> "1.0"``"""
    return ".".join(str(int(a)) for a in alpha)


def parse(text: str, d: int = None) -> MultiIndex:
    """Parse the dot-separated form produced by :py:func:`to_string`.

    Args:
        text: e.g. ``"0.2"``
        d: expected dimension; checked when given

    Returns:
        the multi-index as a tuple
    """
    try:
        alpha = tuple(int(part) for part in str(text).strip().split("."))
    except ValueError as exc:
        raise InputError(f"Malformed multi-index {text!r}: expected dot-separated non-negative integers") from exc
    if any(a < 0 for a in alpha):
        raise InputError(f"Malformed multi-index {text!r}: entries must be non-negative")
    if d is not None and len(alpha) != d:
        raise InputError(f"Multi-index {text!r} has {len(alpha)} entries, expected {d}")
    return alpha


def directional(d: int, axis: int, k: int) -> MultiIndex:
    """The multi-index ``k * e_axis``: a derivative of order ``k`` along one coordinate.

    Order 0 tests positivity, 1 monotonicity and 2 convexity along ``axis``.
    """
    if not 0 <= axis < d:
        raise InputError(f"axis {axis} out of range for dimension {d}")
    if k < 0:
        raise InputError("derivative order must be non-negative")
    return tuple(k if j == axis else 0 for j in range(d))


@dataclass(frozen=True)
class MultiIndexSet:
    """All multi-indices of dimension ``d`` and total order at most ``s``, in basis order.

    Build with :py:meth:`MultiIndexSet.enumerate`; instances are immutable.
    """

    d: int
    s: int
    indices: Tuple[MultiIndex, ...]

    @classmethod
    def enumerate(cls, d: int, s: int, s_max: int = S_MAX) -> "MultiIndexSet":
        """Enumerate every multi-index with ``|alpha| <= s`` in graded order.

        Args:
            d: dimension, at least 1
            s: maximal total order, at most ``s_max``
            s_max: the largest order the kernel supports

        Returns:
            MultiIndexSet of length ``binomial(s + d, d)``
        """
        if d < 1:
            raise InputError("dimension d must be at least 1")
        if s < 0:
            raise InputError("order s must be non-negative")
        if s > s_max:
            raise InputError(f"order s={s} exceeds the largest supported derivative order {s_max}")
        candidates = [alpha for alpha in product(range(s + 1), repeat=d) if sum(alpha) <= s]
        candidates.sort(key=lambda alpha: (sum(alpha), tuple(-a for a in alpha)))
        return cls(d=d, s=s, indices=tuple(candidates))

    @property
    def m_s(self) -> int:
        return len(self.indices)

    def __post_init__(self):
        if len(self.indices) != comb(self.s + self.d, self.d):
            raise InputError(f"expected {comb(self.s + self.d, self.d)} multi-indices, got {len(self.indices)}")

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.indices)

    def __getitem__(self, position: int) -> MultiIndex:
        return self.indices[position]

    def position(self, alpha: Sequence[int]) -> int:
        """Position of ``alpha`` in the ordering"""
        alpha = tuple(int(a) for a in alpha)
        try:
            return self.indices.index(alpha)
        except ValueError as exc:
            raise InputError(f"multi-index {to_string(alpha)} is not in the set (d={self.d}, s={self.s})") from exc

    def labels(self) -> List[str]:
        return [to_string(alpha) for alpha in self.indices]


@dataclass(frozen=True)
class ActiveSet:
    """Positions of a :py:class:`MultiIndexSet` whose weights are not identically zero.

    Dropping a position from the basis gives the same estimator as keeping it
    with zero weights, with a smaller system.
    """

    mask: Tuple[bool, ...]

    def __post_init__(self):
        if not any(self.mask):
            raise InputError("the active multi-index set is empty: every weight column is identically zero")

    @classmethod
    def full(cls, mset: MultiIndexSet) -> "ActiveSet":
        return cls(mask=tuple(True for _ in mset))

    @classmethod
    def from_weights(cls, mset: MultiIndexSet, W: np.ndarray) -> "ActiveSet":
        """Keep the columns of the weight matrix that have a non-zero entry"""
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[1] != mset.m_s:
            raise InputError(f"weight matrix must have {mset.m_s} columns, got shape {W.shape}")
        return cls(mask=tuple(bool(np.any(W[:, a] != 0.0)) for a in range(mset.m_s)))

    @classmethod
    def from_labels(cls, mset: MultiIndexSet, labels: Iterable[str]) -> "ActiveSet":
        chosen = {mset.position(parse(text, mset.d)) for text in labels}
        return cls(mask=tuple(a in chosen for a in range(mset.m_s)))

    @property
    def positions(self) -> Tuple[int, ...]:
        return tuple(a for a, keep in enumerate(self.mask) if keep)

    def __len__(self) -> int:
        return len(self.positions)


def flat_index(mset: MultiIndexSet, i: int, a: int, N: int) -> int:
    """Flat basis position of sample ``i`` and multi-index position ``a``.

    Blocks are multi-index-major: all ``N`` samples of ``mset[0]`` first.
    """
    if not 0 <= i < N:
        raise InputError(f"sample index {i} out of range for N={N}")
    if not 0 <= a < mset.m_s:
        raise InputError(f"multi-index position {a} out of range for m_s={mset.m_s}")
    return a * N + i


def unflatten(mset: MultiIndexSet, k: int, N: int) -> Tuple[int, int]:
    """Inverse of :py:func:`flat_index`: returns ``(i, a)``"""
    if not 0 <= k < N * mset.m_s:
        raise InputError(f"flat index {k} out of range for M={N * mset.m_s}")
    a, i = divmod(k, N)
    return i, a
