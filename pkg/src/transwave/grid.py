"""Periodic lattice on the box [-1, 1]^n, domain masks, cutoffs and stencils.

The last axis is the normal direction x^n.  The interface planes x^n = 0 and
x^n = +-1 (identified) sit on the grid indices ``N // 2`` and ``0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np


class GridError(ValueError):
    pass


class OddResolution(GridError):
    pass


class InterfaceOverlap(GridError):
    pass


class Region(str, Enum):
    OMEGA = "Omega"
    OMEGA_C = "OmegaC"
    INTERFACE = "Interface"


@dataclass(frozen=True)
class TorusGrid:
    n: int
    N: int

    @property
    def h(self) -> float:
        return 2.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def axis_coords(self) -> np.ndarray:
        return -1.0 + self.h * np.arange(self.N)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def coords(self) -> list[np.ndarray]:
        """Full coordinate arrays x^1..x^n, each of shape ``self.shape``."""
        return list(np.meshgrid(*([self.axis_coords] * self.n), indexing="ij"))

    def coord(self, axis: int) -> np.ndarray:
        shp = [1] * self.n
        shp[axis] = self.N
        return np.broadcast_to(self.axis_coords.reshape(shp), self.shape)

    @property
    def normal(self) -> np.ndarray:
        return self.coord(self.n - 1)

    @property
    def interface_indices(self) -> tuple[int, int]:
        return (0, self.N // 2)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def region_mask(self, region: Region | str) -> np.ndarray:
        region = Region(region)
        j = np.arange(self.N)
        half = self.N // 2
        if region is Region.OMEGA:
            line = j > half
        elif region is Region.OMEGA_C:
            line = (j > 0) & (j < half)
        else:
            line = (j == 0) | (j == half)
        shp = [1] * self.n
        shp[-1] = self.N
        return np.broadcast_to(line.reshape(shp), self.shape)


def make_grid(n: int, N: int) -> TorusGrid:
    if n not in (1, 2, 3):
        raise GridError(f"dimension must be 1, 2 or 3, got {n}")
    if N % 2:
        raise OddResolution(f"N must be even so the interface lies on grid points, got {N}")
    if N < 8:
        raise GridError(f"N must be at least 8, got {N}")
    return TorusGrid(n, N)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """An m-component field on a grid; ``values`` has shape ``(m, *grid.shape)``."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise GridError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def data(self) -> np.ndarray:
        """The single component of a scalar field."""
        if self.m != 1:
            raise GridError("data is only defined for scalar fields")
        return self.values[0]

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.grid, np.stack([fn(c) for c in self.values]))


def indicator(grid: TorusGrid) -> GridFunction:
    """chi_Omega with the value 1/2 on interface points."""
    chi = np.where(grid.region_mask(Region.OMEGA), 1.0, 0.0)
    chi = np.where(grid.region_mask(Region.INTERFACE), 0.5, chi)
    return GridFunction(grid, chi)


def _flat_exp(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(tau) -> np.ndarray:
    """C-infinity profile: 1 for |tau| <= 1, 0 for |tau| >= 2, monotone between."""
    r = np.abs(np.asarray(tau, dtype=float))
    a = _flat_exp(2.0 - r)
    b = _flat_exp(r - 1.0)
    return a / (a + b)


def cutoff_phi(grid: TorusGrid, eta: float) -> GridFunction:
    if not 0.0 < eta <= 1.0:
        raise GridError(f"eta must lie in (0, 1], got {eta}")
    phi = np.ones(grid.shape)
    for x in grid.coords():
        phi = phi * smooth_step(4.0 * x / eta)
    return GridFunction(grid, phi)


def periodic_offset(x: np.ndarray, centre: float) -> np.ndarray:
    d = x - centre
    return d - 2.0 * np.round(d / 2.0)


def bump_psi(grid: TorusGrid, x_plus: Sequence[float], x_minus: Sequence[float], rho: float) -> GridFunction:
    """Sum of two radial bumps: 1 on B_rho(x_pm), 0 outside B_2rho(x_pm)."""
    x_plus = np.asarray(x_plus, dtype=float).reshape(grid.n)
    x_minus = np.asarray(x_minus, dtype=float).reshape(grid.n)
    if rho <= 0 or 3 * rho >= 1:
        raise InterfaceOverlap(f"rho={rho} must satisfy 0 < 3 rho < 1")
    if not (x_plus[-1] - 3 * rho > 0 and x_plus[-1] + 3 * rho < 1):
        raise InterfaceOverlap(f"B_3rho({x_plus.tolist()}) leaves Omega")
    if not (x_minus[-1] - 3 * rho > -1 and x_minus[-1] + 3 * rho < 0):
        raise InterfaceOverlap(f"B_3rho({x_minus.tolist()}) leaves the complement of Omega")
    coords = grid.coords()
    psi = np.zeros(grid.shape)
    for centre in (x_plus, x_minus):
        r2 = sum(periodic_offset(x, c) ** 2 for x, c in zip(coords, centre))
        psi = psi + smooth_step(np.sqrt(r2) / rho)
    return GridFunction(grid, psi)


# ---------------------------------------------------------------- stencils


def fd_weights(offsets: Sequence[int], order: int) -> np.ndarray:
    """Weights w with sum_j w_j f(x + o_j) ~ f^(order)(x) on unit spacing."""
    offs = np.asarray(offsets, dtype=float)
    k = np.arange(len(offs))
    vander = offs[None, :] ** k[:, None] / np.array([factorial(i) for i in k], dtype=float)[:, None]
    rhs = np.zeros(len(offs))
    rhs[order] = 1.0
    return np.linalg.solve(vander, rhs)


@dataclass(frozen=True)
class AxisStencil:
    """Row-wise windows: row i reads ``starts[i] + arange(width)``."""

    starts: np.ndarray
    weights: np.ndarray
    periodic: bool

    @property
    def width(self) -> int:
        return self.weights.shape[1]


def centered_width(order: int) -> int:
    return 2 * ((order + 1) // 2) + 1


@lru_cache(maxsize=None)
def periodic_stencil(L: int, order: int) -> AxisStencil:
    w = centered_width(order)
    half = w // 2
    wts = fd_weights(range(-half, half + 1), order)
    return AxisStencil(np.arange(L) - half, np.tile(wts, (L, 1)), True)


@lru_cache(maxsize=None)
def segment_stencil(L: int, order: int) -> AxisStencil:
    """Second-order stencil on L points that never reads outside the segment."""
    wc = centered_width(order)
    ws = order + 2
    if L < ws:
        raise GridError(f"segment of {L} points too short for derivative order {order}")
    half = wc // 2
    central = fd_weights(range(-half, half + 1), order)
    starts = np.zeros(L, dtype=int)
    weights = np.zeros((L, ws))
    for i in range(L):
        if i - half >= 0 and i + half <= L - 1:
            starts[i] = i - half
            weights[i, :wc] = central
        else:
            s = 0 if i - half < 0 else L - ws
            starts[i] = s
            weights[i] = fd_weights(np.arange(s, s + ws) - i, order)
    return AxisStencil(starts, weights, False)


def apply_stencil(arr: np.ndarray, axis: int, st: AxisStencil, h: float, order: int) -> np.ndarray:
    """Apply an axis stencil with a fixed summation order (bitwise reproducible)."""
    a = np.moveaxis(arr, axis, 0)
    L = a.shape[0]
    bshape = (L,) + (1,) * (a.ndim - 1)
    out = np.zeros_like(a, dtype=float)
    rows = np.arange(L)
    for k in range(st.width):
        w = st.weights[:, k]
        if not np.any(w):
            continue
        idx = st.starts + k
        if st.periodic:
            idx = idx % L
        else:
            idx = np.where(w != 0, idx, rows)
        out = out + w.reshape(bshape) * a[idx]
    return np.moveaxis(out / h**order, 0, axis)


def periodic_derivative(arr: np.ndarray, axis: int, h: float, order: int = 1) -> np.ndarray:
    if order == 0:
        return np.array(arr, dtype=float)
    return apply_stencil(arr, axis, periodic_stencil(arr.shape[axis], order), h, order)


def segment_derivative(arr: np.ndarray, axis: int, h: float, order: int = 1) -> np.ndarray:
    if order == 0:
        return np.array(arr, dtype=float)
    return apply_stencil(arr, axis, segment_stencil(arr.shape[axis], order), h, order)


def laplacian(arr: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(arr, dtype=float)
    for ax in range(arr.ndim):
        out = out + (np.roll(arr, -1, ax) - 2.0 * arr + np.roll(arr, 1, ax)) / (h * h)
    return out


SCHEMES = ("centered", "one_sided_into_Omega", "one_sided_into_OmegaC")


def _side_derivative(arr: np.ndarray, grid: TorusGrid, axis: int, into_omega: bool) -> np.ndarray:
    N, half = grid.N, grid.N // 2
    if axis != grid.n - 1:
        d = periodic_derivative(arr, axis, grid.h)
    else:
        idx = np.arange(half, N + 1) % N if into_omega else np.arange(0, half + 1)
        seg = np.take(arr, idx, axis=axis)
        dseg = segment_derivative(seg, axis, grid.h)
        d = np.zeros_like(arr, dtype=float)
        dm = np.moveaxis(d, axis, 0)
        dsm = np.moveaxis(dseg, axis, 0)
        if into_omega:
            # index 0 doubles as x^n = 1, the far end of the Omega segment
            dm[idx[:-1]] = dsm[:-1]
            dm[0] = dsm[-1]
        else:
            dm[idx] = dsm
    side = Region.OMEGA if into_omega else Region.OMEGA_C
    keep = grid.region_mask(side) | grid.region_mask(Region.INTERFACE)
    return np.where(keep, d, 0.0)


def diff(f: GridFunction, axis: int, scheme: str = "centered") -> GridFunction:
    """First derivative along ``axis``.

    ``centered`` is the periodic three-point difference.  The one-sided schemes
    return the derivative seen from one side of the interface (zero off that
    side) and never read values from across the interface.
    """
    g = f.grid
    if not 0 <= axis < g.n:
        raise GridError(f"axis {axis} out of range for n={g.n}")
    if scheme == "centered":
        return GridFunction(g, np.stack([periodic_derivative(c, axis, g.h) for c in f.values]))
    if scheme not in SCHEMES:
        raise GridError(f"unknown scheme {scheme!r}")
    into = scheme == "one_sided_into_Omega"
    return GridFunction(g, np.stack([_side_derivative(c, g, axis, into) for c in f.values]))
