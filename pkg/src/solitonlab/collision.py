"""Collision of a large soliton Q with a small one Q_c (c << 1).

In the frame moving with the large soliton, v(t, x) = u(t, x + t) solves

    S[v] := v_t + (v_xx - v + v^p)_x = 0.

With y_c = x + (1 - c) t, y = x - alpha(y_c) and
alpha(y_c) = a1 int_0^{y_c} Q_c + a2 int_0^{y_c} Q_c^2 the approximate
solution reads

    v4 = Q(y) + Q_c + A1 Q_c + B1 Q_c' + A2 Q_c^2 + B2 (Q_c^2)'.

Collecting the coefficients of Q_c, Q_c', Q_c^2 and Q_c Q_c' (terms with
an explicit factor c and Q_c'^2 are of higher order) yields, with
P = p Q^{p-1} and C = p(p-1)/2,

    (L A1)' + a1 (3Q - 2Q^p)' = P'
    (L B1)' + 3 a1 Q'' - 3 A1'' - P A1 = P
    (L A2)' + a2 (3Q - 2Q^p)' = F2
    (L B2)' + 3 a2 Q'' - 3 A2'' - P A2 = G2

where L = -d^2 + 1 - P and

    F2 = (C Q^{p-2} (1+A1)^2 - a1 (P (1+A1) + 3 A1'') + 3 a1^2 Q'')'
    G2 = C Q^{p-2} (1+A1)^2 + (C Q^{p-2} B1 (1+A1))'
         - a1/2 (9 A1' + 3 B1'' + P B1)' + 3/2 a1^2 Q''.

The B-equations integrate to L B = R with R odd and R(+inf) = -R(-inf);
B is therefore a kink b tanh((p-1) y/2) plus a localized odd part.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .grid import Field, GridSpec, derivative_values, sobolev_norm, wrap
from .modulation import fit_multi
from .profiles import (
    SolitonParams,
    soliton_derivative_values,
    soliton_values,
)
from .solver import EvolveConfig, evolve
from .spectral import assemble_soliton_operator

__all__ = [
    "CollisionConfig",
    "KinkFunction",
    "FirstOrder",
    "SecondOrder",
    "CollisionCorrections",
    "Inconsistent",
    "correction_grid",
    "first_order_corrections",
    "closed_form_A",
    "solve_second_order_system",
    "first_order_residuals",
    "second_order_residuals",
    "corrections",
    "collision_ansatz",
    "ansatz_residual",
    "measure_defect",
]


class Inconsistent(RuntimeError):
    """Solvability condition of the correction system cannot be met."""


@dataclass(frozen=True)
class CollisionConfig:
    p: int = 4
    c: float = 0.05
    delta0: float = 0.05
    grid: GridSpec | None = None
    dt: float = 0.005
    separation: float = 17.0
    margin: float = 28.0
    spacing: float = 0.08
    region: str = "right_of_midpoint"

    def __post_init__(self):
        if self.p not in (3, 4):
            raise ValueError("collision experiments use p = 3 or p = 4")
        if not 0 < self.c < 0.2:
            raise ValueError("c must lie in (0, 0.2)")
        if self.region not in ("full", "right_of_midpoint"):
            raise ValueError("region must be 'full' or 'right_of_midpoint'")

    @property
    def T_c(self) -> float:
        return self.c ** (-0.5 - self.delta0)

    @property
    def start_distance(self) -> float:
        """Initial separation D = separation / sqrt(c)."""
        return self.separation / np.sqrt(self.c)

    @property
    def half_time(self) -> float:
        """The run covers [-T, T] with T = max(T_c, D / (1 - c))."""
        return max(self.T_c, self.start_distance / (1 - self.c))

    def evolution_grid(self) -> GridSpec:
        if self.grid is not None:
            return self.grid
        length = 2 * (self.start_distance + self.margin / np.sqrt(self.c))
        n = 2 ** int(np.ceil(np.log2(length / self.spacing)))
        return GridSpec(length, n)


# ----------------------------------------------------------- kink helper


def _kink(y, p):
    return np.tanh(0.5 * (p - 1) * y)


def _kink_d(y, p, order):
    k = 0.5 * (p - 1)
    t = np.tanh(k * y)
    s2 = 1 - t * t
    if order == 1:
        return k * s2
    if order == 2:
        return -2 * k * k * t * s2
    if order == 3:
        return -2 * k**3 * s2 * (1 - 3 * t * t)
    raise ValueError("order must be 1..3")


@dataclass(frozen=True, eq=False)
class KinkFunction:
    """amp * tanh((p-1) y/2) + localized part, both sampled on ``grid``."""

    grid: GridSpec
    p: int
    amp: float
    local: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.amp * _kink(self.grid.x, self.p) + self.local

    def field(self) -> Field:
        return Field(self.grid, self.values)

    def derivative(self, order: int = 1) -> np.ndarray:
        return self.amp * _kink_d(self.grid.x, self.p, order) + derivative_values(
            self.local, self.grid, order
        )

    def limits(self):
        return -self.amp, self.amp

    def evaluate(self, y) -> np.ndarray:
        """Values at arbitrary points; the localized part vanishes off the grid."""
        return self.amp * _kink(y, self.p) + _interp_local(self.grid, self.local, y)


def _interp_local(grid: GridSpec, values: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    xs = np.append(grid.x, grid.x[-1] + grid.spacing)
    spline = CubicSpline(xs, np.append(values, values[0]), bc_type="periodic")
    out = spline(y)
    out[np.abs(y) >= 0.5 * grid.domain_length] = 0.0
    return out


# -------------------------------------------------------- the linear solver


class _Corrector:
    """Profile data and a regularized inverse of L on span{Q'}^perp."""

    def __init__(self, p: int, grid: GridSpec):
        self.p, self.grid = p, grid
        y = grid.x
        self.y = y
        self.h = grid.spacing
        self.Q = soliton_values(y, p)
        self.Qp = soliton_derivative_values(y, p, 1.0, 1)
        self.Qpp = soliton_derivative_values(y, p, 1.0, 2)
        self.P = p * self.Q ** (p - 1)
        self.C = 0.5 * p * (p - 1)
        self.op = assemble_soliton_operator(SolitonParams(p, 1.0), grid)
        qn = self.Qp / np.linalg.norm(self.Qp)
        self.qn = qn
        self.lu = sla.lu_factor(self.op.matrix + np.outer(qn, qn))
        self.lambdaQ = self.Q / (p - 1) + 0.5 * y * self.Qp
        self.V = -3 * self.lambdaQ + 2 * self.Q / (p - 1)
        phi = _kink(y, p)
        phi2 = _kink_d(y, p, 2)
        self.Lphi = -phi2 + (1 - self.P) * phi

    def L(self, f):
        return self.op.matrix @ f

    def Linv(self, f):
        return sla.lu_solve(self.lu, f - self.qn * (self.qn @ f))

    def D(self, f, n=1):
        return derivative_values(f, self.grid, n)

    def ip(self, f, g):
        return float(self.h * np.sum(f * g))

    def anti(self, f):
        """Antiderivative of a zero-mean localized function, zero at y = 0."""
        g = self.grid
        fk = np.fft.fft(f)
        k = g.wavenumbers
        out = np.zeros_like(fk)
        nz = k != 0
        out[nz] = fk[nz] / (1j * k[nz])
        out[g.num_points // 2] = 0
        F = np.fft.ifft(out).real
        return F - F[g.num_points // 2]

    def solve_kink(self, g):
        """Odd solution of (L B)' = g for odd-free (even) g with <g, Q> = 0.

        Returns the kink amplitude b = (1/2) int g and the localized part.
        """
        p = self.p
        b = 0.5 * self.h * np.sum(g)
        phi1 = _kink_d(self.y, p, 1)
        # L B = R with R = b phi + anti(g - b phi'), R -> +-b at +-infinity
        R = b * _kink(self.y, p) + self.anti(g - b * phi1)
        local = self.Linv(R - b * self.Lphi)
        return float(b), local

    def dLkink(self, kf: KinkFunction):
        """(L B)' for a kink function, with the kink part done analytically."""
        y, p = self.y, self.p
        phi = _kink(y, p)
        phi1 = _kink_d(y, p, 1)
        phi3 = _kink_d(y, p, 3)
        Pp = self.D(self.P)
        kink_part = -phi3 + phi1 - (Pp * phi + self.P * phi1)
        return kf.amp * kink_part + self.D(self.L(kf.local))


def correction_grid(p: int) -> GridSpec:
    """Default grid: 32 points per unit width and tails below 1e-13."""
    return GridSpec(64.0, 2048)


@dataclass(frozen=True, eq=False)
class FirstOrder:
    A1: Field
    B1_kink: KinkFunction
    a1: float

    @property
    def b1(self) -> float:
        return self.B1_kink.amp

    def __iter__(self):
        return iter((self.A1, self.B1_kink, self.a1))


@dataclass(frozen=True, eq=False)
class SecondOrder:
    A2: Field
    B2: KinkFunction
    a2: float
    b: float

    def __iter__(self):
        return iter((self.A2, self.B2, self.a2, self.b))


@dataclass(frozen=True, eq=False)
class CollisionCorrections:
    p: int
    A1: Field
    B1_kink: KinkFunction
    a1: float
    A2: Field
    B2: KinkFunction
    a2: float
    b: float

    @property
    def grid(self) -> GridSpec:
        return self.A1.grid


@lru_cache(maxsize=8)
def _cached_corrector(p, grid):
    return _Corrector(p, grid)


def _corrector(p, grid):
    return _cached_corrector(p, correction_grid(p) if grid is None else grid)


def first_order_corrections(p: int, grid: GridSpec | None = None) -> FirstOrder:
    """Even localized A1 and odd kink B1 with the scalar a1 fixed by solvability."""
    k = _corrector(p, grid)
    U = k.Linv(k.P)
    num = k.ip(k.Q, k.P * (1 + U) + 3 * k.D(U, 2))
    den = k.ip(k.Q, k.P * k.V + 3 * k.D(k.V, 2) + 3 * k.Qpp)
    if abs(den) < 1e-12:
        raise Inconsistent("first-order solvability denominator vanishes")
    a1 = num / den
    A1 = U - a1 * k.V
    g1 = k.P * (1 + A1) + 3 * k.D(A1, 2) - 3 * a1 * k.Qpp
    b1, loc = k.solve_kink(g1)
    return FirstOrder(Field(k.grid, A1), KinkFunction(k.grid, p, b1, loc), float(a1))


def closed_form_A(grid: GridSpec) -> np.ndarray:
    """p = 4 closed form of A1 built from quadratures of Q."""
    y = grid.x
    Q = soliton_values(y, 4)
    Qp = soliton_derivative_values(y, 4, 1.0, 1)
    h = grid.spacing
    a1 = -2 * np.sum(Q) / np.sum(Q * Q)
    cum = cumulative_simpson(Q * Q, dx=h, initial=0)
    cum -= np.interp(0.0, y, cum)
    return (1 / 3) * Qp * cum - (2 / 3) * Q**3 + a1 * ((1 / 3) * Q + 1.5 * y * Qp)


def _F2_G2(k: _Corrector, first: FirstOrder):
    A1 = first.A1.values
    a1 = first.a1
    B1 = first.B1_kink
    B1v = B1.values
    B1pp = B1.derivative(2)
    QpC = k.C * k.Q ** (k.p - 2)
    base = QpC * (1 + A1) ** 2
    H2 = base - a1 * (k.P * (1 + A1) + 3 * k.D(A1, 2)) + 3 * a1 * a1 * k.Qpp
    F2 = k.D(H2)
    G2 = (
        base
        + k.D(QpC * B1v * (1 + A1))
        - 0.5 * a1 * k.D(9 * k.D(A1) + 3 * B1pp + k.P * B1v)
        + 1.5 * a1 * a1 * k.Qpp
    )
    return H2, F2, G2


def solve_second_order_system(p: int, grid: GridSpec | None, first: FirstOrder) -> SecondOrder:
    k = _corrector(p, grid if grid is not None else first.A1.grid)
    H2, _, G2 = _F2_G2(k, first)
    A20 = k.Linv(H2)
    g0 = G2 + 3 * k.D(A20, 2) + k.P * A20
    ga = -3 * k.Qpp - 3 * k.D(k.V, 2) - k.P * k.V
    den = k.ip(k.Q, ga)
    if abs(den) < 1e-12:
        raise Inconsistent("second-order Fredholm condition is degenerate")
    a2 = -k.ip(k.Q, g0) / den
    A2 = A20 - a2 * k.V
    g2 = g0 + a2 * ga
    resid = k.ip(k.Q, g2)
    if abs(resid) > 1e-8 * max(1.0, np.abs(g2).max()):
        raise Inconsistent(f"Fredholm condition violated: <g2, Q> = {resid:.3e}")
    b, loc = k.solve_kink(g2)
    return SecondOrder(Field(k.grid, A2), KinkFunction(k.grid, p, b, loc), float(a2), float(b))


def corrections(p: int, grid: GridSpec | None = None) -> CollisionCorrections:
    first = first_order_corrections(p, grid)
    second = solve_second_order_system(p, grid, first)
    return CollisionCorrections(p, *first, *second)


def first_order_residuals(p: int, first: FirstOrder) -> tuple:
    """Sup-norms of both first-order equations, using the assembled operator."""
    k = _corrector(p, first.A1.grid)
    A1 = first.A1.values
    a1 = first.a1
    r1 = k.D(k.L(A1) + a1 * (3 * k.Q - 2 * k.Q**p) - k.P)
    r2 = k.dLkink(first.B1_kink) + 3 * a1 * k.Qpp - 3 * k.D(A1, 2) - k.P * A1 - k.P
    return float(np.abs(r1).max()), float(np.abs(r2).max())


def second_order_residuals(p: int, first: FirstOrder, second: SecondOrder) -> tuple:
    k = _corrector(p, first.A1.grid)
    _, F2, G2 = _F2_G2(k, first)
    A2 = second.A2.values
    a2 = second.a2
    r1 = k.D(k.L(A2) + a2 * (3 * k.Q - 2 * k.Q**p)) - F2
    r2 = k.dLkink(second.B2) + 3 * a2 * k.Qpp - 3 * k.D(A2, 2) - k.P * A2 - G2
    return float(np.abs(r1).max()), float(np.abs(r2).max())


# ------------------------------------------------------------------ ansatz


def _primitive_from_zero(f_of_s, length: float, s) -> np.ndarray:
    """int_0^s f by cumulative Simpson on a fine auxiliary grid, then spline."""
    n = 2 ** int(np.ceil(np.log2(length / 0.01)))
    xs = np.linspace(-0.5 * length, 0.5 * length, n + 1)
    cum = cumulative_simpson(f_of_s(xs), x=xs, initial=0)
    spline = CubicSpline(xs, cum)
    return spline(np.clip(s, xs[0], xs[-1])) - spline(0.0)


def collision_ansatz(
    cfg: CollisionConfig,
    corr: CollisionCorrections,
    t: float,
    order: int = 4,
    grid: GridSpec | None = None,
) -> Field:
    """v0 (pure sum), v3 (first order) or v4 (second order) in the moving frame."""
    if order not in (0, 3, 4):
        raise ValueError("order must be 0, 3 or 4")
    grid = cfg.evolution_grid() if grid is None else grid
    p, c = cfg.p, cfg.c
    L = grid.domain_length
    yc = wrap(grid.x + (1 - c) * t, L)
    qc = soliton_values(yc, p, c)
    if order == 0:
        return Field(grid, soliton_values(grid.x, p) + qc, t)
    qcp = soliton_derivative_values(yc, p, c, 1)
    alpha = corr.a1 * _primitive_from_zero(lambda s: soliton_values(s, p, c), L, yc)
    if order == 4:
        alpha += corr.a2 * _primitive_from_zero(lambda s: soliton_values(s, p, c) ** 2, L, yc)
    y = grid.x - alpha
    A1 = _interp_local(corr.grid, corr.A1.values, y)
    B1 = corr.B1_kink.evaluate(y)
    v = soliton_values(y, p) + qc + A1 * qc + B1 * qcp
    if order == 4:
        A2 = _interp_local(corr.grid, corr.A2.values, y)
        B2 = corr.B2.evaluate(y)
        v = v + A2 * qc**2 + B2 * 2 * qc * qcp
    return Field(grid, v, t)


def ansatz_residual(cfg: CollisionConfig, corr, t: float, order: int, grid=None, dt=1e-4) -> float:
    """H^1 norm of S[v] = v_t + (v_xx - v + v^p)_x, v_t by central difference."""
    v = collision_ansatz(cfg, corr, t, order, grid)
    vt = (
        collision_ansatz(cfg, corr, t + dt, order, grid).values
        - collision_ansatz(cfg, corr, t - dt, order, grid).values
    ) / (2 * dt)
    g = v.grid
    vv = v.values
    flux = derivative_values(vv, g, 2) - vv + vv**cfg.p
    S = vt + derivative_values(flux, g, 1)
    return sobolev_norm(Field(g, S), 1)


# ------------------------------------------------------------------ defect


@dataclass
class DefectResult:
    c: float
    p: int
    pre_fit: list
    post_fit: list
    defect_norm: float
    defect_full: float
    defect_right: float
    T: float
    grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        enc = lambda ps: [{"c": q.c, "x0": q.x0} for q in ps]  # noqa: E731
        return {
            "p": self.p,
            "c": self.c,
            "T": self.T,
            "pre_fit": enc(self.pre_fit),
            "post_fit": enc(self.post_fit),
            "defect_norm": self.defect_norm,
            "defect_full": self.defect_full,
            "defect_right_of_midpoint": self.defect_right,
            "grid": self.grid,
        }


def _h1_on(z: Field, mask: np.ndarray) -> float:
    zx = derivative_values(z.values, z.grid, 1)
    return float(np.sqrt(z.grid.spacing * np.sum((z.values**2 + zx**2)[mask])))


def _peaks(u: Field, p: int, c: float) -> list:
    """Guesses from the two highest separated maxima; the collision shifts
    both solitons by an O(1/sqrt(c)) phase, so the free-motion positions
    are not good enough for Newton."""
    x, v = u.grid.x, np.asarray(u.values)
    big = x[int(np.argmax(v))]
    far = np.abs(wrap(x - big, u.grid.domain_length)) > 10.0
    small = x[far][int(np.argmax(v[far]))]
    return [SolitonParams(p, c, float(small)), SolitonParams(p, 1.0, float(big))]


def measure_defect(cfg: CollisionConfig) -> DefectResult:
    """Evolve the pure two-soliton sum through the collision and fit the outcome.

    The frame moves with the large soliton. The run starts at -T with the
    small soliton a distance D to the right and ends at +T, when it sits a
    distance of about D to the left.
    """
    grid = cfg.evolution_grid()
    p, c = cfg.p, cfg.c
    T = cfg.half_time
    D = (1 - c) * T
    L = grid.domain_length
    x = grid.x
    u0 = soliton_values(x, p) + soliton_values(wrap(x - D, L), p, c)
    u0 = Field(grid, u0, -T)
    pre, _ = fit_multi(u0, [SolitonParams(p, c, D), SolitonParams(p, 1.0, 0.0)])
    stride = max(1, int(round(2 * T / cfg.dt)))
    traj = evolve(u0, EvolveConfig(p, cfg.dt, 2 * T, stride, frame_speed=1.0, guard=1e-5))
    uT = traj.snapshots[-1]
    guess = _peaks(uT, p, c)
    post, z = fit_multi(uT, guess)
    full = _h1_on(z, np.ones(grid.num_points, bool))
    mid = 0.5 * (post[0].x0 + post[1].x0)
    # half of the circle from the midpoint forward past the large soliton
    right = _h1_on(z, wrap(x - mid, L) >= 0)
    value = full if cfg.region == "full" else right
    return DefectResult(c, p, pre, post, value, full, right, T, grid.to_dict())
