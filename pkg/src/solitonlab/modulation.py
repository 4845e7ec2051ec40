"""Modulation: fit shifts and scalings so the remainder is orthogonal to the
soliton (or breather) directions, plus the localized mass functional."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, sobolev_inner, sobolev_norm, wrap
from .profiles import (
    BreatherParams,
    SolitonParams,
    breather_derivative,
    scaling_direction_derivative_values,
    scaling_direction_values,
    soliton_derivative_values,
    soliton_values,
)

__all__ = [
    "ModulationError",
    "NoConvergence",
    "Degenerate",
    "GuardViolation",
    "CrossingDetected",
    "FitResult",
    "ModulationTrack",
    "fit_single",
    "fit_multi",
    "fit_breather",
    "kink",
    "localized_mass",
    "track_solitons",
    "track_breather",
]

NEWTON_GUARD = 0.3
MAX_COND = 1e12


class ModulationError(RuntimeError):
    pass


class NoConvergence(ModulationError):
    pass


class Degenerate(ModulationError):
    pass


class GuardViolation(ModulationError):
    """Initial guess too far from the data for the Newton iteration."""


class CrossingDetected(ModulationError):
    pass


@dataclass(frozen=True, eq=False)
class FitResult:
    params: object
    residual: Field
    iterations: int
    conditions: np.ndarray
    jacobian: np.ndarray

    def __iter__(self):
        return iter((self.params, self.residual))


def _newton(func, x0, tol, max_iter, admissible=lambda x: True, xtol=1e-13):
    """Damped Newton on func(x) -> (F, J); halves the step until |F| decreases.

    Also stops once the full Newton step is below xtol relative to x: |F| has
    then reached its rounding floor, which can sit above ``tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    F, J = func(x)
    for it in range(max_iter + 1):
        if np.max(np.abs(F)) <= tol:
            return x, F, J, it
        if it == max_iter:
            break
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > MAX_COND:
            raise Degenerate(f"Jacobian condition number {cond:.3e}")
        step = np.linalg.solve(J, -F)
        if np.max(np.abs(step)) <= xtol * (1.0 + np.max(np.abs(x))):
            return x, F, J, it
        lam, norm0 = 1.0, np.linalg.norm(F)
        for _ in range(30):
            trial = x + lam * step
            if admissible(trial):
                Ft, Jt = func(trial)
                if np.linalg.norm(Ft) < norm0 or lam < 1e-6:
                    break
            lam *= 0.5
        else:
            raise NoConvergence("line search failed")
        x, F, J = trial, Ft, Jt
    raise NoConvergence(f"no convergence in {max_iter} iterations (|F| = {np.max(np.abs(F)):.3e})")


def _local_set(grid, p, c, x0):
    s = wrap(grid.x - x0, grid.domain_length)
    return {
        "q": soliton_values(s, p, c),
        "q1": soliton_derivative_values(s, p, c, 1),
        "q2": soliton_derivative_values(s, p, c, 2),
        "lq": scaling_direction_values(s, p, c),
        "lq1": scaling_direction_derivative_values(s, p, c),
    }


def _h1_guard(u: Field, model: np.ndarray, ref: np.ndarray, guard: float):
    dist = sobolev_norm(u.with_values(u.values - model), 1)
    size = sobolev_norm(u.with_values(ref), 1)
    if dist >= guard * size:
        raise GuardViolation(
            f"initial distance {dist:.3e} exceeds {guard:g} x soliton norm {size:.3e}"
        )


def fit_single(
    u: Field,
    params0: SolitonParams,
    fit_scaling: bool = False,
    tol: float = 1e-12,
    max_iter: int = 50,
    guard: float = NEWTON_GUARD,
) -> FitResult:
    """Solve <z, Q_c'(.-rho)> = 0 (and <z, Q_c(.-rho)> = 0) for rho (and c).

    The residual is z = u - Q_c(. - rho). With rho as the unknown the shift
    entry of the Jacobian is int Q_c'^2 - <z, Q_c''>.
    """
    g = u.grid
    h = g.spacing
    p = params0.p
    v = np.real(u.values)
    s0 = _local_set(g, p, params0.c, params0.x0)
    _h1_guard(u, s0["q"], s0["q"], guard)

    def unpack(x):
        return (x[0], x[1]) if fit_scaling else (params0.c, x[0])

    def func(x):
        c, rho = unpack(x)
        s = _local_set(g, p, c, rho)
        z = v - s["q"]
        F1 = h * z @ s["q1"]
        J11 = h * (s["q1"] @ s["q1"] - z @ s["q2"])
        if not fit_scaling:
            return np.array([F1]), np.array([[J11]])
        F2 = h * z @ s["q"]
        # d/dc of <z, q'> and <z, q>; d/drho of <z, q>
        J1c = h * (-s["lq"] @ s["q1"] + z @ s["lq1"])
        J2c = h * (-s["lq"] @ s["q"] + z @ s["lq"])
        J2r = h * (s["q1"] @ s["q"] - z @ s["q1"])
        return np.array([F2, F1]), np.array([[J2c, J2r], [J1c, J11]])

    x0 = [params0.c, params0.x0] if fit_scaling else [params0.x0]
    x, F, J, it = _newton(func, x0, tol, max_iter, admissible=lambda x: (not fit_scaling) or x[0] > 0)
    c, rho = unpack(x)
    fitted = params0.replace(c=float(c), x0=float(rho))
    z = v - _local_set(g, p, c, rho)["q"]
    return FitResult(fitted, Field(g, z, u.time), it, F, J)


def fit_multi(
    u: Field,
    guesses,
    tol: float = 1e-12,
    max_iter: int = 50,
    guard: float = NEWTON_GUARD,
) -> FitResult:
    """Simultaneous fit of all (c_j, rho_j) from the 2N orthogonality conditions."""
    g = u.grid
    h = g.spacing
    guesses = list(guesses)
    n = len(guesses)
    p = guesses[0].p
    v = np.real(u.values)
    sets0 = [_local_set(g, p, q.c, q.x0) for q in guesses]
    model0 = sum(s["q"] for s in sets0)
    ref = max(sets0, key=lambda s: np.max(s["q"]))["q"]
    _h1_guard(u, model0, ref, guard)
    L = g.domain_length

    def func(x):
        cs, rs = x[:n], x[n:]
        sets = [_local_set(g, p, cs[j], rs[j]) for j in range(n)]
        z = v - sum(s["q"] for s in sets)
        F = np.empty(2 * n)
        J = np.zeros((2 * n, 2 * n))
        for j, sj in enumerate(sets):
            F[j] = h * z @ sj["q"]
            F[n + j] = h * z @ sj["q1"]
            for k, sk in enumerate(sets):
                J[j, k] = -h * sk["lq"] @ sj["q"]
                J[j, n + k] = h * sk["q1"] @ sj["q"]
                J[n + j, k] = -h * sk["lq"] @ sj["q1"]
                J[n + j, n + k] = h * sk["q1"] @ sj["q1"]
            J[j, j] += h * z @ sj["lq"]
            J[j, n + j] -= h * z @ sj["q1"]
            J[n + j, j] += h * z @ sj["lq1"]
            J[n + j, n + j] -= h * z @ sj["q2"]
        return F, J

    x0 = [q.c for q in guesses] + [q.x0 for q in guesses]
    x, F, J, it = _newton(func, x0, tol, max_iter, admissible=lambda x: np.all(x[:n] > 0))
    fitted = [guesses[j].replace(c=float(x[j]), x0=float(x[n + j])) for j in range(n)]
    # ordering measured on the circle around the circular mean of the guesses
    ang = np.angle(np.mean(np.exp(2j * np.pi * np.array([q.x0 for q in guesses]) / L)))
    ref = ang * L / (2 * np.pi)
    pos = [wrap(q.x0 - ref, L) for q in fitted]
    pos0 = [wrap(q.x0 - ref, L) for q in guesses]
    if list(np.argsort(pos, kind="stable")) != list(np.argsort(pos0, kind="stable")):
        raise CrossingDetected(f"fitted shifts {[q.x0 for q in fitted]} lost their ordering")
    z = v - sum(_local_set(g, p, q.c, q.x0)["q"] for q in fitted)
    return FitResult(fitted, Field(g, z, u.time), it, F, J)


def fit_breather(
    u: Field,
    params0: BreatherParams,
    t: float,
    tol: float = 1e-11,
    max_iter: int = 50,
    guard: float = NEWTON_GUARD,
) -> FitResult:
    """Minimize ||u - B(t; alpha, beta, x1, x2)||_{H^2}^2 over (x1, x2)."""
    g = u.grid
    B0 = breather_derivative(params0, t, g)
    dist = sobolev_norm(u - B0, 2)
    if dist >= guard * sobolev_norm(B0, 2):
        raise GuardViolation(f"initial H^2 distance {dist:.3e} too large")

    def func(x):
        bp = params0.replace(x1=float(x[0]), x2=float(x[1]))
        z = u - breather_derivative(bp, t, g)
        d = [breather_derivative(bp, t, g, n1=1), breather_derivative(bp, t, g, n2=1)]
        dd = {
            (0, 0): breather_derivative(bp, t, g, n1=2),
            (0, 1): breather_derivative(bp, t, g, n1=1, n2=1),
            (1, 1): breather_derivative(bp, t, g, n2=2),
        }
        dd[(1, 0)] = dd[(0, 1)]
        grad = np.array([-sobolev_inner(z, d[i], 2) for i in range(2)])
        hess = np.array(
            [
                [sobolev_inner(d[i], d[j], 2) - sobolev_inner(z, dd[(i, j)], 2) for j in range(2)]
                for i in range(2)
            ]
        )
        return grad, hess

    x, F, J, it = _newton(func, [params0.x1, params0.x2], tol, max_iter)
    fitted = params0.replace(x1=float(x[0]), x2=float(x[1]))
    z = u - breather_derivative(fitted, t, g)
    return FitResult(fitted, Field(g, z.values, u.time), it, F, J)


# ---------------------------------------------------------- monotonicity


def kink(s):
    """phi(s) = (2/pi) arctan(exp(s))."""
    s = np.asarray(s, dtype=float)
    return (2 / np.pi) * np.arctan(np.exp(np.minimum(s, 700.0)))


def localized_mass(u: Field, m0: float, A: float, t: float, centre: float = 0.0) -> float:
    """(1/2) int u^2 phi((x - centre - m0 t)/A), x taken on the circle around the kink."""
    if A < 4:
        raise ValueError("A must be at least 4")
    s = wrap(u.grid.x - centre - m0 * t, u.grid.domain_length) / A
    return float(0.5 * u.grid.spacing * np.sum(np.real(u.values) ** 2 * kink(s)))


# ---------------------------------------------------------------- tracks


@dataclass
class ModulationTrack:
    times: list = field(default_factory=list)
    params: list = field(default_factory=list)
    residual_h1: list = field(default_factory=list)
    residual_h2: list = field(default_factory=list)
    converged: list = field(default_factory=list)

    def rho(self, j: int) -> np.ndarray:
        return np.array([ps[j].x0 for ps in self.params])

    def c(self, j: int) -> np.ndarray:
        return np.array([ps[j].c for ps in self.params])

    def rows(self) -> list:
        out = []
        for t, ps, r1, r2 in zip(self.times, self.params, self.residual_h1, self.residual_h2):
            row = {"t": t}
            for j, q in enumerate(ps):
                if isinstance(q, SolitonParams):
                    row[f"rho_{j + 1}"] = q.x0
                    row[f"c_{j + 1}"] = q.c
                else:
                    row[f"x1_{j + 1}"] = q.x1
                    row[f"x2_{j + 1}"] = q.x2
            row["z_H1"] = r1
            row["z_H2"] = r2
            out.append(row)
        return out


def _unwrap_guesses(prev, fitted, L):
    """Keep the shifts continuous in time instead of jumping by L at the seam."""
    return [q.replace(x0=float(p.x0 + wrap(q.x0 - p.x0, L))) for p, q in zip(prev, fitted)]


def track_solitons(snapshots, guesses, fit_scaling: bool = True, frame_speed: float = 0.0) -> ModulationTrack:
    """Fit every snapshot, warm-starting from the previous one.

    Snapshots computed in a frame moving with speed v hold u(t, x + v t);
    shifts are reported in the fixed frame. Each guess is advanced by
    c_j times the elapsed time, since rho_j' is close to c_j.
    """
    track = ModulationTrack()
    current = list(guesses)
    t_prev = snapshots[0].time if len(snapshots) else 0.0
    for snap in snapshots:
        off = frame_speed * snap.time
        L = snap.grid.domain_length
        current = [q.replace(x0=q.x0 + q.c * (snap.time - t_prev)) for q in current]
        t_prev = snap.time
        box = [q.replace(x0=float(wrap(q.x0 - off, L))) for q in current]
        if len(box) == 1:
            res = fit_single(snap, box[0], fit_scaling=fit_scaling)
            fitted = [res.params]
        else:
            res = fit_multi(snap, box)
            fitted = list(res.params)
        fitted = [q.replace(x0=q.x0 + off) for q in fitted]
        fitted = _unwrap_guesses(current, fitted, L)
        track.times.append(float(snap.time))
        track.params.append(fitted)
        track.residual_h1.append(sobolev_norm(res.residual, 1))
        track.residual_h2.append(sobolev_norm(res.residual, 2))
        track.converged.append(True)
        current = fitted
    return track


def track_breather(snapshots, params0: BreatherParams, frame_speed: float = 0.0) -> ModulationTrack:
    """Breather analogue of track_solitons; only (x1, x2) are modulated."""
    track = ModulationTrack()
    current = params0
    for snap in snapshots:
        off = frame_speed * snap.time
        box = current.replace(x1=current.x1 + off, x2=current.x2 + off)
        res = fit_breather(snap, box, snap.time)
        fitted = res.params.replace(x1=res.params.x1 - off, x2=res.params.x2 - off)
        track.times.append(float(snap.time))
        track.params.append([fitted])
        track.residual_h1.append(sobolev_norm(res.residual, 1))
        track.residual_h2.append(sobolev_norm(res.residual, 2))
        track.converged.append(True)
        current = fitted
    return track
