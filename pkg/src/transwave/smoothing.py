"""Trivial extension by zero and the interface-respecting mollifier.

The mollifier extends each side across the interface planes, convolves with a
compactly supported radial bump and blends the two results with chi_Omega.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridError, GridFunction, TorusGrid, indicator, periodic_offset, smooth_step
from .norms import region_values

# f(-y) ~ sum_k a_k f(k y) matches f, f', f'' at the plane
_HIGHER_ORDER_REFLECTION = np.array([6.0, -8.0, 3.0])


def extend_zero(f: GridFunction) -> GridFunction:
    """Keep f on Omega, halve it on the interface, zero on the complement."""
    return f * indicator(f.grid)


@dataclass(frozen=True)
class MollifierKernel:
    grid: TorusGrid
    radius: float
    weights: np.ndarray

    @property
    def support(self) -> float:
        return 2.0 * self.radius

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights) * self.grid.cell_volume)


@lru_cache(maxsize=64)
def make_kernel(grid: TorusGrid, radius: float) -> MollifierKernel:
    """(1 - (r / 2 lambda)^2)^3 on r < 2 lambda, normalised to unit mass."""
    if not 0.0 < radius <= 1.0:
        raise GridError(f"mollifier radius must lie in (0, 1], got {radius}")
    r2 = sum(periodic_offset(x, 0.0) ** 2 for x in grid.coords())
    q = 1.0 - r2 / (2.0 * radius) ** 2
    w = np.where(q > 0, q, 0.0) ** 3
    w = w / (np.sum(w) * grid.cell_volume)
    w.flags.writeable = False
    return MollifierKernel(grid, radius, w)


def _convolve(arr: np.ndarray, kernel: MollifierKernel) -> np.ndarray:
    g = kernel.grid
    # kernel is centred at the origin, which sits at index N/2 on every axis
    k = np.fft.ifftshift(kernel.weights)
    axes = tuple(range(arr.ndim))
    out = np.fft.irfftn(np.fft.rfftn(arr) * np.fft.rfftn(k), s=arr.shape, axes=axes)
    return out * g.cell_volume


def _extend_side(arr: np.ndarray, grid: TorusGrid, omega_side: bool, reflection_order: int) -> np.ndarray:
    """Extend one side's values across both interface planes to the whole torus."""
    N, half = grid.N, grid.N // 2
    seg, _, _ = region_values(arr, grid, "Omega" if omega_side else "OmegaC")
    ax = grid.n - 1
    seg = np.moveaxis(seg, ax, 0)  # seg[o] sits at distance o*h from the near plane
    j = np.arange(N)
    out = np.empty((N,) + seg.shape[1:])
    if reflection_order == 1:
        src = np.abs(j - half) if omega_side else np.where(j <= half, j, N - j)
        out[:] = seg[src]
        return np.moveaxis(out, 0, ax)
    if reflection_order != 3:
        raise GridError("reflection_order must be 1 or 3")
    a = _HIGHER_ORDER_REFLECTION
    bshape = (-1,) + (1,) * (seg.ndim - 1)
    if omega_side:
        inside = j >= half
        out[inside] = seg[j[inside] - half]
        y = half - j[~inside]          # distance below x^n = 0, in cells
        d = j[~inside]                 # distance above x^n = 1 (index 0 is x^n = -1)
        near_lo, near_hi = 0, half     # segment indices of the planes 0 and 1
        sign = 1
    else:
        inside = j <= half
        out[inside] = seg[j[inside]]
        y = j[~inside] - half          # distance above x^n = 0
        d = N - j[~inside]             # distance below x^n = -1 (= +1)
        near_lo, near_hi = half, 0
        sign = -1
    h = grid.h
    w_lo = smooth_step(6.0 * y * h).reshape(bshape)
    w_hi = smooth_step(6.0 * d * h).reshape(bshape)
    # plain mirror image away from the planes keeps constants exact
    mirror = seg[np.clip(near_lo + sign * y, 0, half)]
    ext = (1.0 - w_lo - w_hi) * mirror
    for k, ak in enumerate(a, start=1):
        i_lo = np.clip(near_lo + sign * k * y, 0, half)
        i_hi = np.clip(near_hi - sign * k * d, 0, half)
        ext = ext + ak * (w_lo * seg[i_lo] + w_hi * seg[i_hi])
    out[~inside] = ext
    return np.moveaxis(out, 0, ax)


def mollify(f: GridFunction, lam: float, reflection_order: int = 3) -> GridFunction:
    """Side-wise mollification J_lambda.

    ``reflection_order=1`` is the plain even reflection; the default 3-term
    reflection also matches first and second normal derivatives at the planes.
    """
    if not 0.0 < lam <= 1.0:
        raise GridError(f"lambda must lie in (0, 1], got {lam}")
    g = f.grid
    kern = make_kernel(g, float(lam))
    chi = indicator(g).data
    comps = []
    for c in f.values:
        plus = _convolve(_extend_side(c, g, True, reflection_order), kern)
        minus = _convolve(_extend_side(c, g, False, reflection_order), kern)
        comps.append(chi * plus + (1.0 - chi) * minus)
    return GridFunction(g, np.stack(comps))
