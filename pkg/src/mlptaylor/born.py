"""Zero-energy S-wave scattering lengths of sampled potentials.

Ground truth comes from integrating the reduced radial equation
u'' = U(r) u with u(0) = 0, u'(0) = 1 across piecewise-constant slabs
via exact 2x2 transfer matrices; the scattering length in units of the
(unit) range is a0 = 1 - u(1)/u'(1).  The first two perturbative
kernels of the sampled problem are also provided in closed form.

Everything is dimensionless: a potential sample is the vector
U_k = U(r = k/H0), k = 1..H0, and attractive means U_k <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BoundStatePresent(ValueError):
    """The zero-energy solution has a node in (0, 1]: the well supports a
    bound state and the sample is rejected."""


class ThresholdSingularity(ValueError):
    """u'(1) = 0: the well sits exactly at a bound-state threshold."""


def scattering_length(u_samples, h0: int) -> float:
    """Scattering length of a sampled potential.

    The k-th sample is taken as the constant potential value on the slab
    ((k-1)/h0, k/h0]; each slab advances (u, u') by the exact transfer
    matrix (trigonometric for attractive values, hyperbolic for
    repulsive, a shear for zero).

    Raises :class:`BoundStatePresent` if u acquires a node inside (0, 1]
    and :class:`ThresholdSingularity` if u'(1) vanishes; both signal
    sample rejection during data generation rather than failure.
    """
    pot = np.asarray(u_samples, dtype=float)
    if pot.shape != (h0,):
        raise ValueError(f"expected {h0} samples, got shape {pot.shape}")
    if not np.all(np.isfinite(pot)):
        raise ValueError("potential samples must be finite")

    h = 1.0 / h0
    u, up = 0.0, 1.0
    for v in pot:
        if v < 0.0:
            w = np.sqrt(-v)
            c, s = np.cos(w * h), np.sin(w * h)
            u, up = c * u + (s / w) * up, -w * s * u + c * up
        elif v > 0.0:
            w = np.sqrt(v)
            c, s = np.cosh(w * h), np.sinh(w * h)
            u, up = c * u + (s / w) * up, w * s * u + c * up
        else:
            u = u + h * up
        # u starts out positive (u'(0)=1); reaching zero or below at a slab
        # boundary means a node, i.e. a zero-energy bound state
        if u <= 0.0:
            raise BoundStatePresent("zero-energy solution has a node inside the range")
    if up == 0.0:
        raise ThresholdSingularity("u'(1) = 0: bound state exactly at threshold")
    return 1.0 - u / up


@dataclass(frozen=True)
class BornKernels:
    """Sampled first- and second-order perturbative kernels.

    grad[k-1] = k^2/h0^3 and
    hess[k1-1, k2-1] = -k1 k2 (k1 + k2 - |k1 - k2|)/h0^5 with 1-based k.
    """

    h0: int
    grad: np.ndarray
    hess: np.ndarray


def born_kernels(h0: int) -> BornKernels:
    if h0 < 1:
        raise ValueError(f"h0 must be >= 1, got {h0}")
    k = np.arange(1, h0 + 1, dtype=float)
    grad = k**2 / h0**3
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    hess = -(k1 * k2 * (k1 + k2 - np.abs(k1 - k2))) / h0**5
    return BornKernels(h0=h0, grad=grad, hess=hess)


def born_approx(u_samples, h0: int, order: int) -> float:
    """Truncated perturbative scattering length: the linear term, plus half
    the quadratic form for order 2."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    pot = np.asarray(u_samples, dtype=float)
    kern = born_kernels(h0)
    out = float(kern.grad @ pot)
    if order == 2:
        out += 0.5 * float(pot @ kern.hess @ pot)
    return out
