"""Backlund residuals, breather identities and the H^2 Lyapunov functional.

Spatial transformation:  G(u_a, u_b, m) = (u_a - u_b)/sqrt2 - m sin((u~_a + u~_b)/sqrt2),
where u~ denotes a spatial primitive. Vacuum -> complex soliton uses
m = b + i a, complex soliton -> breather uses m = b - i a.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import BoundaryTailWarning, Field, antiderivative, derivative_values
from .profiles import (
    BreatherParams,
    breather_derivative,
    breather_directions,
    breather_primitive,
    breather_profile,
    breather_time_derivative,
    complex_soliton,
    complex_soliton_derivative,
)
from .solver import conserved_quantities

__all__ = [
    "BacklundPair",
    "InconsistentPrimitive",
    "primitive_mismatch",
    "backlund_residual",
    "backlund_time_residual",
    "vacuum_soliton_pair",
    "soliton_breather_pair",
    "elliptic_residual",
    "breather_identity_residuals",
    "lyapunov_H",
    "lyapunov_expansion_ratio",
]

SQRT2 = np.sqrt(2.0)
IM_GUARD = 50.0


class InconsistentPrimitive(ValueError):
    """A supplied primitive does not differentiate to its field."""


def primitive_mismatch(u: Field, ut: Field) -> float:
    """Sup-norm of (u~ - u~(start)) - cumulative integral of u.

    The primitive of a kink jumps once across the periodic seam; the arrays
    are rolled so that the seam sits at the box edge before comparing.
    """
    v, w = np.asarray(u.values), np.asarray(ut.values)
    h = u.grid.spacing
    jumps = np.abs(np.diff(np.append(w, w[0])))
    j = int(np.argmax(jumps))
    if jumps[j] > 10 * h * np.max(np.abs(v)) + 1e-12:
        shift = -(j + 1)
    else:
        shift = -int(np.argmin(np.abs(v)))
    v, w = np.roll(v, shift), np.roll(w, shift)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryTailWarning)
        cum = antiderivative(Field(u.grid, v), method="spectral").values
    return float(np.max(np.abs(w - w[0] - cum)))


@dataclass(frozen=True, eq=False)
class BacklundPair:
    u_a: Field
    u_a_tilde: Field
    u_b: Field
    u_b_tilde: Field
    m: complex
    tol: float = 1e-6
    u_a_x: Field | None = None
    u_b_x: Field | None = None

    def __post_init__(self):
        for u, ut, name in ((self.u_a, self.u_a_tilde, "a"), (self.u_b, self.u_b_tilde, "b")):
            err = primitive_mismatch(u, ut)
            scale = max(1.0, float(np.max(np.abs(ut.values))))
            if err > self.tol * scale:
                raise InconsistentPrimitive(f"primitive of u_{name} off by {err:.3e}")

    @property
    def grid(self):
        return self.u_a.grid

    def phase(self) -> np.ndarray:
        arg = (self.u_a_tilde.values + self.u_b_tilde.values) / SQRT2
        if np.max(np.abs(np.imag(arg))) > IM_GUARD:
            raise OverflowError("imaginary part of the Backlund phase exceeds the guard")
        return arg


def backlund_residual(pair: BacklundPair) -> Field:
    g = (pair.u_a.values - pair.u_b.values) / SQRT2 - pair.m * np.sin(pair.phase())
    return Field(pair.grid, np.asarray(g, dtype=complex))


def backlund_time_residual(pair: BacklundPair, u_a_t_tilde: Field, u_b_t_tilde: Field) -> Field:
    """u~_a,t - u~_b,t + m [(u_a + u_b)_x cos S + (u_a^2 + u_b^2)/sqrt2 sin S]."""
    S = pair.phase()
    grid = pair.grid
    ua, ub = pair.u_a.values, pair.u_b.values
    if pair.u_a_x is not None and pair.u_b_x is not None:
        dsum = pair.u_a_x.values + pair.u_b_x.values
    else:
        dsum = derivative_values(np.asarray(ua + ub, dtype=complex), grid, 1)
    r = (
        u_a_t_tilde.values
        - u_b_t_tilde.values
        + pair.m * (dsum * np.cos(S) + (ua**2 + ub**2) / SQRT2 * np.sin(S))
    )
    return Field(grid, np.asarray(r, dtype=complex))


def vacuum_soliton_pair(params: BreatherParams, grid):
    """(Q, 0) with m = b + i a, and the matching time primitives."""
    qt, q, qtt = complex_soliton(params, grid)
    zero = Field(grid, np.zeros(grid.num_points, complex))
    qx = complex_soliton_derivative(params, grid)
    pair = BacklundPair(q, qt, zero, zero, params.beta + 1j * params.alpha, u_a_x=qx, u_b_x=zero)
    return pair, qtt, zero


def soliton_breather_pair(params: BreatherParams, grid, t: float = 0.0):
    """(B, Q) with m = b - i a; the breather at time t, Q as in the vacuum pair."""
    qt, q, qtt = complex_soliton(params, grid)
    B = breather_profile(params, t, grid)
    Bt = breather_primitive(params, t, grid)
    _, _, Btt = breather_directions(params, t, grid)
    Bx = breather_derivative(params, t, grid, nx=1)
    qx = complex_soliton_derivative(params, grid)
    pair = BacklundPair(
        B, Bt, q, qt, params.beta - 1j * params.alpha, u_a_x=Bx, u_b_x=qx
    )
    return pair, Btt, qtt


# ------------------------------------------------------ breather identities


def elliptic_residual(u: Field, params: BreatherParams) -> Field:
    """G[u] = u'''' - 2(b^2-a^2)(u'' + u^3) + (a^2+b^2)^2 u + 5u u'^2 + 5u^2 u'' + 3/2 u^5."""
    a, b = params.alpha, params.beta
    v = np.real(u.values)
    g = u.grid
    u1 = derivative_values(v, g, 1)
    u2 = derivative_values(v, g, 2)
    u4 = derivative_values(v, g, 4)
    r = (
        u4
        - 2 * (b * b - a * a) * (u2 + v**3)
        + (a * a + b * b) ** 2 * v
        + 5 * v * u1**2
        + 5 * v**2 * u2
        + 1.5 * v**5
    )
    return Field(g, r)


def breather_identity_residuals(params: BreatherParams, t: float, grid) -> dict:
    """Sup-norms of the first-order, integrated, nonlocal and elliptic identities."""
    a, b = params.alpha, params.beta
    B = breather_profile(params, t, grid).values
    Bx = breather_derivative(params, t, grid, nx=1).values
    Bxx = breather_derivative(params, t, grid, nx=2).values
    _, _, Btil_t = breather_directions(params, t, grid)
    Btil_t = Btil_t.values
    Bt = breather_time_derivative(params, t, grid).values
    Bxt = breather_time_derivative(params, t, grid, nx=1).values
    Mt = antiderivative(Field(grid, B * Bt), method="spectral").values
    first = Btil_t + Bxx + B**3
    second = Bx**2 + 0.5 * B**4 + 2 * B * Btil_t - 2 * Mt
    nonlocal_ = Bxt + 2 * Mt * B - 2 * (b * b - a * a) * Btil_t - (a * a + b * b) ** 2 * B
    ell = elliptic_residual(Field(grid, B), params).values
    sup = lambda r: float(np.max(np.abs(r)))  # noqa: E731
    return {
        "r_first": sup(first),
        "r_second": sup(second),
        "r_nonlocal": sup(nonlocal_),
        "r_elliptic": sup(ell),
    }


# ------------------------------------------------------------- Lyapunov


def lyapunov_H(u: Field, params: BreatherParams) -> float:
    """H = F + 2(b^2 - a^2) E + (a^2 + b^2)^2 M with the mKdV functionals."""
    a, b = params.alpha, params.beta
    M, E, F = conserved_quantities(u, 3, with_F=True)
    return F + 2 * (b * b - a * a) * E + (a * a + b * b) ** 2 * M


def lyapunov_expansion_ratio(B: Field, z: Field, eps: float, params: BreatherParams, op) -> float:
    """(H[B + eps z] - H[B] - eps^2/2 <z, L z>) / eps^3."""
    H0 = lyapunov_H(B, params)
    H1 = lyapunov_H(B + eps * z, params)
    return (H1 - H0 - 0.5 * eps**2 * op.form(z)) / eps**3
