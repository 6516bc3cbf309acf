"""Minimal dense numeric substrate.

Packed symmetric tensors, a central finite-difference oracle for mixed
partial derivatives up to third order, and one-parameter linear least
squares.  Everything here is deliberately independent of the analytic
derivative engine so it can serve as a cross-check for it.

All floats are 64-bit; the tolerances used throughout the test suite
assume that width.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

# Central-difference step sizes balancing truncation against round-off
# for unit-scale arguments.
DEFAULT_STEPS = {1: 1e-4, 2: 1e-4, 3: 5e-3}


class NonFiniteSample(ValueError):
    """A function evaluation on the finite-difference stencil was not finite."""


class DegenerateFit(ValueError):
    """Least-squares design vector is identically zero."""


def _packed_tuples(dim: int, order: int) -> list[tuple[int, ...]]:
    """All non-decreasing index tuples of the given order, lexicographic."""
    return list(itertools.combinations_with_replacement(range(dim), order))


_INDEX_CACHE: dict[tuple[int, int], dict[tuple[int, ...], int]] = {}


def packed_index(dim: int, order: int) -> dict[tuple[int, ...], int]:
    """Map each non-decreasing index tuple to its packed storage position."""
    key = (dim, order)
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = {t: i for i, t in enumerate(_packed_tuples(dim, order))}
    return _INDEX_CACHE[key]


def packed_size(dim: int, order: int) -> int:
    """Number of independent entries of a symmetric tensor: C(dim+order-1, order)."""
    return math.comb(dim + order - 1, order)


@dataclass
class SymTensor:
    """Symmetric tensor with packed storage.

    Entries are stored for non-decreasing index tuples only, in
    lexicographic order, so reading any permutation of an index tuple
    returns the same value and storage stays at C(dim+order-1, order).
    """

    order: int
    dim: int
    data: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        n = packed_size(self.dim, self.order)
        if self.data is None:
            self.data = np.zeros(n)
        else:
            self.data = np.asarray(self.data, dtype=float)
            if self.data.shape != (n,):
                raise ValueError(f"packed data must have shape ({n},), got {self.data.shape}")

    def _pos(self, idx: tuple[int, ...]) -> int:
        if len(idx) != self.order:
            raise ValueError(f"expected {self.order} indices, got {len(idx)}")
        return packed_index(self.dim, self.order)[tuple(sorted(idx))]

    def __getitem__(self, idx) -> float:
        if isinstance(idx, int):
            idx = (idx,)
        return float(self.data[self._pos(tuple(idx))])

    def __setitem__(self, idx, value: float) -> None:
        if isinstance(idx, int):
            idx = (idx,)
        self.data[self._pos(tuple(idx))] = value

    def to_dense(self) -> np.ndarray:
        """Expand into a full ndarray of shape (dim,) * order."""
        out = np.empty((self.dim,) * self.order)
        for t, i in packed_index(self.dim, self.order).items():
            v = self.data[i]
            for perm in set(itertools.permutations(t)):
                out[perm] = v
        return out

    @classmethod
    def from_dense(cls, arr: np.ndarray, symmetrize: bool = False) -> "SymTensor":
        """Pack a dense tensor.  With ``symmetrize`` the entry stored for each
        canonical tuple is the average over all its index permutations."""
        arr = np.asarray(arr, dtype=float)
        order = arr.ndim
        dim = arr.shape[0]
        if arr.shape != (dim,) * order:
            raise ValueError(f"expected cubic shape, got {arr.shape}")
        data = np.empty(packed_size(dim, order))
        for t, i in packed_index(dim, order).items():
            if symmetrize:
                perms = list(set(itertools.permutations(t)))
                data[i] = sum(arr[p] for p in perms) / len(perms)
            else:
                data[i] = arr[t]
        return cls(order=order, dim=dim, data=data)


# One-dimensional central-difference stencils: offset -> weight, to be
# divided by step**multiplicity.  Second-order accurate in the step.
_STENCILS = {
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def finite_diff(f, x0, multi_index: tuple[int, ...], step: float | None = None) -> float:
    """Central-difference estimate of a mixed partial derivative.

    Parameters
    ----------
    f : callable
        Scalar field on R^d.
    x0 : array_like
        Expansion point.
    multi_index : tuple of int
        Differentiation axes (0-based); repetition differentiates twice
        along that axis.  At most three entries.
    step : float, optional
        Stencil step.  Defaults to 1e-4 for orders 1-2 and 5e-3 for
        order 3.

    Returns
    -------
    float
        Estimate of d^|mi| f / dx_{mi} at x0, second-order accurate.
    """
    order = len(multi_index)
    if not 1 <= order <= 3:
        raise ValueError(f"multi_index must have 1 to 3 entries, got {order}")
    if step is None:
        step = DEFAULT_STEPS[order]
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")

    x0 = np.asarray(x0, dtype=float)
    counts: dict[int, int] = {}
    for ax in multi_index:
        counts[ax] = counts.get(ax, 0) + 1

    axes = sorted(counts)
    per_axis = [_STENCILS[counts[ax]] for ax in axes]
    total = 0.0
    for combo in itertools.product(*per_axis):
        x = x0.copy()
        w = 1.0
        for ax, (offset, weight) in zip(axes, combo):
            x[ax] += offset * step
            w *= weight
        val = f(x)
        if not np.isfinite(val):
            raise NonFiniteSample(f"f evaluated to non-finite value at stencil point {x}")
        total += w * val
    return total / step**order


def fd_tensor(f, x0, order: int, step: float | None = None) -> np.ndarray:
    """Dense symmetric derivative tensor of `f` at `x0` from finite differences.

    Fills independent entries via :func:`finite_diff` and mirrors them
    across permutations.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    out = np.empty((d,) * order)
    for t in _packed_tuples(d, order):
        v = finite_diff(f, x0, t, step)
        for perm in set(itertools.permutations(t)):
            out[perm] = v
    return out


def lstsq_1param(design, targets) -> float:
    """argmin_c sum_i (c*design_i - target_i)^2 = (d.t) / (d.d)."""
    d = np.asarray(design, dtype=float)
    t = np.asarray(targets, dtype=float)
    if d.shape != t.shape or d.size == 0:
        raise ValueError(f"design and targets must be same nonzero length, got {d.shape} vs {t.shape}")
    denom = float(d @ d)
    if denom == 0.0:
        raise DegenerateFit("design vector is identically zero")
    return float(d @ t) / denom
