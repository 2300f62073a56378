"""Discrete Sobolev, intersection and energy norms.

Piecewise norms are evaluated on the closed half-box segment of the normal
axis.  The two end values of a segment are replaced by cubic extrapolation from
the segment interior, so the norm sees one-sided limits and never the
interface sample itself (which carries the 1/2 convention of the indicator).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import (
    GridError,
    GridFunction,
    TorusGrid,
    periodic_derivative,
    segment_derivative,
)

MAX_ORDER = 4
REGIONS = ("torus", "Omega", "OmegaC", "box", "box_plus", "box_minus")


def m_weight(order: int) -> int:
    return 2 if order >= 2 else order


@dataclass(frozen=True)
class NormReport:
    value: float
    contributions: tuple[float, ...]
    N: int
    labels: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class NormSpec:
    family: str
    s: int = 0
    k: int = 0
    r: int | None = None
    region: str = "torus"

    FAMILIES = ("H_region", "Hc_intersection", "E_s", "Ec_s", "E_sr", "E_base")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown norm family {self.family!r}")
        if not 0 <= self.k <= self.s:
            raise ValueError("need 0 <= k <= s")
        if self.family == "E_sr" and (self.r is None or self.r > self.s):
            raise ValueError("E_sr needs r <= s")


# ------------------------------------------------------------------ layouts


def _axis_layout(grid: TorusGrid, axis: int, region: str):
    """``None`` for a periodic axis, else the index list of a closed segment."""
    N, half = grid.N, grid.N // 2
    normal = axis == grid.n - 1
    if region == "torus":
        return None
    if region in ("Omega", "OmegaC"):
        if not normal:
            return None
        return np.arange(half, N + 1) % N if region == "Omega" else np.arange(0, half + 1)
    if region == "box" or not normal:
        return np.arange(0, N + 1) % N
    return np.arange(half, N + 1) % N if region == "box_plus" else np.arange(0, half + 1)


def _extrapolate_ends(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(np.array(a, dtype=float), axis, 0)
    a[0] = 3.0 * a[1] - 3.0 * a[2] + a[3]
    a[-1] = 3.0 * a[-2] - 3.0 * a[-3] + a[-4]
    return np.moveaxis(a, 0, axis)


def region_values(arr: np.ndarray, grid: TorusGrid, region: str):
    """Restrict a scalar array to a region; returns values, periodic flags, weights."""
    if region not in REGIONS:
        raise GridError(f"unknown region {region!r}")
    vals = np.asarray(arr, dtype=float)
    periodic, weights = [], []
    for ax in range(grid.n):
        idx = _axis_layout(grid, ax, region)
        if idx is None:
            periodic.append(True)
            weights.append(np.full(grid.N, grid.h))
            continue
        vals = _extrapolate_ends(np.take(vals, idx, axis=ax), ax)
        w = np.full(len(idx), grid.h)
        w[0] = w[-1] = grid.h / 2
        periodic.append(False)
        weights.append(w)
    return vals, periodic, weights


def _quad_weight(weights: list[np.ndarray]) -> np.ndarray:
    out = weights[0]
    for w in weights[1:]:
        out = np.multiply.outer(out, w)
    return out


def multi_indices(n: int, order: int):
    return [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order]


def region_derivative(vals: np.ndarray, periodic: list[bool], h: float, alpha: Sequence[int]) -> np.ndarray:
    out = vals
    for ax, a in enumerate(alpha):
        if a == 0:
            continue
        op = periodic_derivative if periodic[ax] else segment_derivative
        out = op(out, ax, h, a)
    return out


def _lp(values: np.ndarray, w: np.ndarray, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(values))) if values.size else 0.0
    return float(np.sum(w * np.abs(values) ** p) ** (1.0 / p))


def _components(f) -> np.ndarray:
    if isinstance(f, GridFunction):
        return f.values
    a = np.asarray(f, dtype=float)
    return a


def seminorms(f, grid: TorusGrid, s: int, region: str = "torus", p: float = 2.0) -> list[float]:
    """|f|_{k,p} over the region for k = 0..s (mixed multi-index sum)."""
    if s > MAX_ORDER:
        raise GridError(f"order {s} exceeds the supported maximum {MAX_ORDER}")
    comps = _components(f)
    if comps.shape == grid.shape:
        comps = comps[None]
    out = []
    region_data = [region_values(c, grid, region) for c in comps]
    w = _quad_weight(region_data[0][2])
    for k in range(s + 1):
        acc = []
        for vals, periodic, _ in region_data:
            for alpha in multi_indices(grid.n, k):
                d = region_derivative(vals, periodic, grid.h, alpha)
                acc.append(_lp(d, w, p))
        if np.isinf(p):
            out.append(max(acc))
        else:
            out.append(float(np.sum(np.asarray(acc) ** p) ** (1.0 / p)))
    return out


def sobolev_norm(f: GridFunction, s: int, region: str = "torus", p: float = 2.0) -> NormReport:
    parts = seminorms(f, f.grid, s, region, p)
    if np.isinf(p):
        value = max(parts)
    else:
        value = float(np.sum(np.asarray(parts) ** p) ** (1.0 / p))
    return NormReport(value, tuple(parts), f.grid.N, tuple(f"order{k}" for k in range(s + 1)))


def sobolev_sq(arr: np.ndarray, grid: TorusGrid, s: int, region: str = "torus") -> float:
    return float(sum(c * c for c in seminorms(arr, grid, s, region)))


def intersect_norm(f: GridFunction, k: int, s: int, domain: str = "torus") -> NormReport:
    """The H^{k,s} norm: H^s on each side plus H^k across the whole domain."""
    if not 0 <= k <= s:
        raise GridError("need 0 <= k <= s")
    if domain == "torus":
        regions = ("Omega", "torus", "OmegaC")
    elif domain == "box":
        regions = ("box_plus", "box", "box_minus")
    else:
        raise GridError(f"unknown domain {domain!r}")
    terms = (
        sobolev_norm(f, s, regions[0]).value,
        sobolev_norm(f, k, regions[1]).value,
        sobolev_norm(f, s, regions[2]).value,
    )
    return NormReport(float(np.sqrt(sum(t * t for t in terms))), terms, f.grid.N, regions)


def intersect_sq(arr: np.ndarray, grid: TorusGrid, k: int, s: int) -> float:
    return sobolev_sq(arr, grid, s, "Omega") + sobolev_sq(arr, grid, k, "torus") + sobolev_sq(arr, grid, s, "OmegaC")


def _as_gf(u, grid: TorusGrid | None) -> GridFunction:
    if isinstance(u, GridFunction):
        return u
    if grid is None:
        raise GridError("a grid is needed for raw arrays")
    return GridFunction(grid, u)


def norm(f: GridFunction, spec: NormSpec) -> NormReport:
    if spec.family == "H_region":
        return sobolev_norm(f, spec.s, spec.region)
    if spec.family == "Hc_intersection":
        return intersect_norm(f, spec.k, spec.s)
    raise ValueError(f"{spec.family} is an energy norm; use energy_norm")


def energy_norm(jet: Sequence, spec: NormSpec, grid: TorusGrid | None = None) -> NormReport:
    """E^s, its H^{0,.} variant, its truncation E^{s,r}, and the base norm E."""
    entries = [_as_gf(u, grid) for u in jet]
    fam, s = spec.family, spec.s
    if fam == "E_base":
        if len(entries) < 2:
            raise ValueError("E needs (u_0, u_1)")
        a = sobolev_norm(entries[0], 1).value
        b = sobolev_norm(entries[1], 0).value
        return NormReport(float(np.hypot(a, b)), (a, b), entries[0].grid.N, ("H1", "L2"))
    if fam not in ("E_s", "Ec_s", "E_sr"):
        raise ValueError(f"{fam} is not an energy norm")
    last = spec.r if fam == "E_sr" else s
    if len(entries) < last + 1:
        raise ValueError(f"jet of length {len(entries)} too short for {fam} with s={s}")
    parts = []
    for ell in range(last + 1):
        k = 0 if fam == "Ec_s" else m_weight(s - ell)
        parts.append(intersect_norm(entries[ell], k, s - ell).value)
    value = float(np.sqrt(sum(p * p for p in parts)))
    return NormReport(value, tuple(parts), entries[0].grid.N, tuple(f"u{l}" for l in range(last + 1)))


def energy_base(u0: np.ndarray, u1: np.ndarray, grid: TorusGrid) -> float:
    """E = sqrt(|u0|_{H^1}^2 + |u1|_{L^2}^2) on raw arrays (fast path)."""
    h, dv = grid.h, grid.cell_volume
    total = float(np.sum(u0 * u0) + np.sum(u1 * u1))
    for ax in range(grid.n):
        d = periodic_derivative(u0, ax, h)
        total += float(np.sum(d * d))
    return float(np.sqrt(total * dv))


# ------------------------------------------------------ calculus inequalities

INEQUALITIES = (
    "holder",
    "sobolev_embed",
    "interpolation",
    "multiplication",
    "gagliardo_nirenberg",
    "moser",
    "elemE",
    "fpropB",
)
CHECK_RESOLUTIONS = (32, 64, 128)


@dataclass(frozen=True)
class ConstantRow:
    inequality: str
    parameters: str
    N: int
    max_ratio: float


@dataclass
class ConstantTable:
    rows: list[ConstantRow] = field(default_factory=list)

    def ratio(self, inequality: str, N: int) -> float:
        for r in self.rows:
            if r.inequality == inequality and r.N == N:
                return r.max_ratio
        raise KeyError((inequality, N))

    def as_records(self) -> list[dict]:
        return [r.__dict__.copy() for r in self.rows]


def corpus_family(grid: TorusGrid) -> list[np.ndarray]:
    """Frozen corpus: trigonometric polynomials, periodic piecewise polynomials, scaled bumps."""
    from .grid import smooth_step

    x = grid.coord(0)
    pi = np.pi
    return [
        np.sin(2 * pi * x),
        np.cos(2 * pi * x) + 0.5 * np.sin(6 * pi * x),
        0.3 + np.cos(pi * x) ** 2 * np.sin(4 * pi * x),
        (1.0 - x**2) ** 3,
        x**2 * (1.0 - x**2) ** 3,
        smooth_step(x / 0.3),
        0.5 * smooth_step((x - 0.4) / 0.15),
    ]


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else np.inf
    return lhs / rhs


def _sob(u: np.ndarray, grid: TorusGrid, s: int, p: float = 2.0) -> float:
    parts = seminorms(u, grid, s, "torus", p)
    if np.isinf(p):
        return max(parts)
    return float(np.sum(np.asarray(parts) ** p) ** (1.0 / p))


def _semi(u: np.ndarray, grid: TorusGrid, k: int, p: float = 2.0) -> float:
    return seminorms(u, grid, k, "torus", p)[k]


def _holder(fam, grid, p=2.0, q=2.0, r=1.0):
    out = []
    for u, v in itertools.product(fam, repeat=2):
        out.append(_ratio(_sob(u * v, grid, 0, r), _sob(u, grid, 0, p) * _sob(v, grid, 0, q)))
    return out, f"p={p},q={q},r={r}"


def _embed(fam, grid):
    return [_ratio(np.max(np.abs(u)), _sob(u, grid, 1)) for u in fam], "p=2,k=1"


def _interp(fam, grid, k=1, s=2):
    out = []
    for u in fam:
        rhs = _semi(u, grid, s) ** (k / s) * _semi(u, grid, 0) ** (1 - k / s)
        out.append(_ratio(_semi(u, grid, k), rhs))
    return out, f"k={k},s={s},p=2"


def _mult(fam, grid, s1=2, s2=2, s3=2):
    out = []
    for u, v in itertools.product(fam, repeat=2):
        out.append(_ratio(_sob(u * v, grid, s3), _sob(u, grid, s1) * _sob(v, grid, s2)))
    return out, f"s1={s1},s2={s2},s3={s3}"


def _gn(fam, grid, j=1, s=2):
    out = []
    for u in fam:
        lhs = _semi(u, grid, j, 2.0 * s / j)
        rhs = np.max(np.abs(u)) ** (1 - j / s) * _semi(u, grid, s) ** (j / s)
        out.append(_ratio(lhs, rhs))
    return out, f"j={j},s={s}"


def _moser(fam, grid, s=2):
    out = []
    for u in list(fam) + [np.zeros_like(fam[0])]:
        lhs = _sob(u * u, grid, s)
        rhs = (1.0 + np.max(np.abs(u))) ** s * _sob(u, grid, s)
        out.append(_ratio(lhs, rhs))
    return out, f"f(u)=u^2,s={s}"


def _product3(fam, grid, s=2):
    out = []
    for a, b, c in itertools.combinations(fam, 3):
        lhs = _sob(a * b * c, grid, s)
        out.append(_ratio(lhs, _sob(a, grid, s) * _sob(b, grid, s) * _sob(c, grid, s)))
    return out, f"l=3,s={s}"


def _time_composite(fam, grid, s=1):
    # d_t sin(u) at t = 0 for u(t) = u0 + t u1 is cos(u0) u1
    out = []
    for u0, u1 in itertools.product(fam, repeat=2):
        lhs = _sob(np.cos(u0) * u1, grid, s)
        rhs = (1.0 + _sob(u0, grid, 2)) ** s * _sob(u1, grid, s)
        out.append(_ratio(lhs, rhs))
    return out, f"f=sin,l=1,s={s}"


_CHECKS = {
    "holder": _holder,
    "sobolev_embed": _embed,
    "interpolation": _interp,
    "multiplication": _mult,
    "gagliardo_nirenberg": _gn,
    "moser": _moser,
    "elemE": _product3,
    "fpropB": _time_composite,
}


def inequality_check(name: str, inputs=None, resolutions: Sequence[int] = CHECK_RESOLUTIONS) -> ConstantTable:
    """Measured LHS/RHS ratios (constant left out) of a calculus inequality.

    ``inputs`` maps a grid to a list of test arrays; the frozen corpus is used
    when it is omitted.  One row per resolution holds the max ratio.
    """
    from .grid import make_grid

    if name not in _CHECKS:
        raise ValueError(f"unknown inequality {name!r}")
    family = inputs or corpus_family
    table = ConstantTable()
    for N in resolutions:
        grid = make_grid(1, N)
        ratios, params = _CHECKS[name](family(grid), grid)
        table.rows.append(ConstantRow(name, params, N, float(max(ratios))))
    return table
