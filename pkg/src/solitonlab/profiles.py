"""Closed-form gKdV solitons, mKdV breathers and the complex mKdV soliton.

Breather derivatives of every order come from symbolic differentiation of
the primitive ``arctan((b/a) sin(a y1) sech(b y2))``; the resulting
expressions are compiled once per derivative multi-index and cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .grid import Field, GridSpec, wrap

__all__ = [
    "SolitonParams",
    "BreatherParams",
    "SingularShift",
    "sech",
    "soliton_values",
    "soliton_derivative_values",
    "scaling_direction_values",
    "soliton_profile",
    "soliton_derivative",
    "scaling_direction",
    "breather_profile",
    "breather_primitive",
    "breather_derivative",
    "breather_directions",
    "breather_time_derivative",
    "complex_soliton",
    "complex_soliton_derivative",
    "singular_distance",
    "EPS_SING",
]

SQRT2 = np.sqrt(2.0)
EPS_SING = 1e-3


class SingularShift(ValueError):
    """Shift pair too close to the set where the complex soliton blows up."""


@dataclass(frozen=True)
class SolitonParams:
    p: int
    c: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p not in (2, 3, 4, 5):
            raise ValueError("p must be one of 2, 3, 4, 5")
        if not self.c > 0:
            raise ValueError("scaling c must be positive")

    def replace(self, **kw) -> "SolitonParams":
        d = {"p": self.p, "c": self.c, "x0": self.x0}
        d.update(kw)
        return SolitonParams(**d)


@dataclass(frozen=True)
class BreatherParams:
    alpha: float
    beta: float
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @property
    def delta(self) -> float:
        return self.alpha**2 - 3 * self.beta**2

    @property
    def gamma(self) -> float:
        return 3 * self.alpha**2 - self.beta**2

    def replace(self, **kw) -> "BreatherParams":
        d = {"alpha": self.alpha, "beta": self.beta, "x1": self.x1, "x2": self.x2}
        d.update(kw)
        return BreatherParams(**d)


def sech(z):
    """Overflow-free hyperbolic secant for real or complex input."""
    z = np.asarray(z)
    s = np.where(np.real(z) >= 0, 1, -1)
    e = np.exp(-s * z)
    return 2 * e / (1 + e * e)


# ------------------------------------------------------------- solitons


def _kappa(p, c):
    return 0.5 * (p - 1) * np.sqrt(c)


def soliton_values(s, p: int, c: float = 1.0):
    """Q_c(s) = c^{1/(p-1)} Q(sqrt(c) s)."""
    if not c > 0:
        raise ValueError("scaling c must be positive")
    amp = (c * (p + 1) / 2.0) ** (1.0 / (p - 1))
    return amp * sech(_kappa(p, c) * np.asarray(s, dtype=float)) ** (2.0 / (p - 1))


def soliton_derivative_values(s, p: int, c: float = 1.0, order: int = 1):
    """Closed-form s-derivatives of Q_c up to order 3."""
    s = np.asarray(s, dtype=float)
    q = soliton_values(s, p, c)
    q1 = -np.sqrt(c) * np.tanh(_kappa(p, c) * s) * q
    if order == 0:
        return q
    if order == 1:
        return q1
    if order == 2:
        return c * q - q**p
    if order == 3:
        return c * q1 - p * q ** (p - 1) * q1
    raise ValueError("order must be 0..3")


def scaling_direction_values(s, p: int, c: float = 1.0):
    """Lambda Q_c = dQ_c/dc = (Q_c/(p-1) + s Q_c'/2)/c."""
    s = np.asarray(s, dtype=float)
    q = soliton_values(s, p, c)
    q1 = soliton_derivative_values(s, p, c, 1)
    return (q / (p - 1) + 0.5 * s * q1) / c


def scaling_direction_derivative_values(s, p: int, c: float = 1.0):
    """s-derivative of Lambda Q_c."""
    s = np.asarray(s, dtype=float)
    q1 = soliton_derivative_values(s, p, c, 1)
    q2 = soliton_derivative_values(s, p, c, 2)
    return (q1 / (p - 1) + 0.5 * q1 + 0.5 * s * q2) / c


def _local(params: SolitonParams, grid: GridSpec):
    return wrap(grid.x - params.x0, grid.domain_length)


def soliton_profile(params: SolitonParams, grid: GridSpec) -> Field:
    return Field(grid, soliton_values(_local(params, grid), params.p, params.c))


def soliton_derivative(params: SolitonParams, grid: GridSpec, order: int = 1) -> Field:
    s = _local(params, grid)
    return Field(grid, soliton_derivative_values(s, params.p, params.c, order))


def scaling_direction(params: SolitonParams, grid: GridSpec) -> Field:
    return Field(grid, scaling_direction_values(_local(params, grid), params.p, params.c))


# ------------------------------------------------------------- breathers


@lru_cache(maxsize=None)
def _phi_partial(i: int, j: int):
    """Compiled d^i/dy1^i d^j/dy2^j of arctan((b/a) sin(a y1) sech(b y2))."""
    import sympy as sp

    y1, y2, a, b = sp.symbols("y1 y2 a b", real=True)
    expr = sp.atan(b / a * sp.sin(a * y1) * sp.sech(b * y2))
    if i:
        expr = sp.diff(expr, y1, i)
    if j:
        expr = sp.diff(expr, y2, j)
    return sp.lambdify(
        (y1, y2, a, b), expr, modules=[{"sech": sech}, "numpy"], cse=True
    )


def _breather_coords(params: BreatherParams, t: float, grid: GridSpec):
    centre = -params.x2 - params.gamma * t
    y2 = wrap(grid.x - centre, grid.domain_length)
    y1 = centre + y2 + params.delta * t + params.x1
    return y1, y2


def _breather_jet(params, t, grid, i, j):
    y1, y2 = _breather_coords(params, t, grid)
    val = _phi_partial(i, j)(y1, y2, params.alpha, params.beta)
    return 2 * SQRT2 * np.broadcast_to(val, y1.shape).astype(float)


def breather_derivative(
    params: BreatherParams, t: float, grid: GridSpec, nx: int = 0, n1: int = 0, n2: int = 0
) -> Field:
    """d_x^nx d_x1^n1 d_x2^n2 of B, where B = d_x of the arctan primitive."""
    m = nx + 1
    out = np.zeros(grid.num_points)
    for j in range(m + 1):
        out += comb(m, j) * _breather_jet(params, t, grid, n1 + j, n2 + m - j)
    return Field(grid, out, t)


def breather_profile(params: BreatherParams, t: float, grid: GridSpec) -> Field:
    return breather_derivative(params, t, grid)


def breather_primitive(params: BreatherParams, t: float, grid: GridSpec) -> Field:
    """B-tilde = 2 sqrt2 arctan(...), the spatial primitive of B."""
    return Field(grid, _breather_jet(params, t, grid, 0, 0), t)


def breather_time_derivative(params: BreatherParams, t: float, grid: GridSpec, nx: int = 0) -> Field:
    """d_x^nx B_t = delta d_x^nx B_1 + gamma d_x^nx B_2."""
    b1 = breather_derivative(params, t, grid, nx=nx, n1=1)
    b2 = breather_derivative(params, t, grid, nx=nx, n2=1)
    return params.delta * b1 + params.gamma * b2


def breather_directions(params: BreatherParams, t: float, grid: GridSpec):
    """Return (B1, B2, Btilde_t) with B_i = dB/dx_i and Btilde_t the time
    derivative of the primitive, delta dBtilde/dx1 + gamma dBtilde/dx2."""
    b1 = breather_derivative(params, t, grid, n1=1)
    b2 = breather_derivative(params, t, grid, n2=1)
    bt = params.delta * _breather_jet(params, t, grid, 1, 0) + params.gamma * _breather_jet(
        params, t, grid, 0, 1
    )
    return b1, b2, Field(grid, bt, t)


# ------------------------------------------------------- complex soliton


def singular_distance(params: BreatherParams) -> float:
    """Distance from x1 - x2 to the nearest point of (pi/alpha)(Z + 1/2)."""
    period = np.pi / params.alpha
    r = (params.x1 - params.x2) / period - 0.5
    return abs(r - np.round(r)) * period


def complex_soliton(params: BreatherParams, grid: GridSpec, eps_sing: float = EPS_SING):
    """Return (Qtilde, Q, Qtilde_t) for y1 = x + x1, y2 = x + x2.

    Qtilde is the continuous branch of 2 sqrt2 arctan(exp(b y2 + i a y1))
    that vanishes at the far left.
    """
    a, b = params.alpha, params.beta
    if singular_distance(params) < eps_sing * np.pi / a:
        raise SingularShift(
            f"x1 - x2 = {params.x1 - params.x2:g} lies within "
            f"{eps_sing:g}*pi/alpha of the singular set"
        )
    y2 = wrap(grid.x + params.x2, grid.domain_length)
    y1 = y2 - params.x2 + params.x1
    zeta = b * y2 + 1j * a * y1
    m = b + 1j * a
    q = SQRT2 * m * sech(zeta)

    # arctan(w) = log((1 + i w)/(1 - i w)) / 2i, written without overflow
    w = np.exp(-np.abs(b * y2))
    phase = np.exp(-1j * np.where(y2 >= 0, 1.0, -1.0) * a * y1)
    ew = w * phase  # exp(-|Re zeta|) times the unit phase, either side
    ratio = np.where(y2 >= 0, (ew + 1j) / (ew - 1j), (1 + 1j * ew) / (1 - 1j * ew))
    order = np.argsort(y2, kind="stable")
    ang = np.empty_like(y2)
    ang[order] = np.unwrap(np.angle(ratio[order]))
    ang -= 2 * np.pi * np.round(ang[order[0]] / (2 * np.pi))
    log_ratio = np.log(np.abs(ratio)) + 1j * ang
    qt = 2 * SQRT2 * log_ratio / 2j
    qtt = -(m**2) * q
    return Field(grid, qt), Field(grid, q), Field(grid, qtt)


def complex_soliton_derivative(params: BreatherParams, grid: GridSpec, order: int = 1) -> Field:
    """Closed-form Q_x = -m tanh(zeta) Q, or Q_xx = m^2 (1 - 2 sech^2 zeta) Q for order 2."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    a, b = params.alpha, params.beta
    y2 = wrap(grid.x + params.x2, grid.domain_length)
    zeta = b * y2 + 1j * a * (y2 - params.x2 + params.x1)
    m = b + 1j * a
    s = sech(zeta)
    if order == 2:
        return Field(grid, SQRT2 * m**3 * s * (1 - 2 * s * s))
    return Field(grid, -SQRT2 * m * m * np.tanh(zeta) * s)
