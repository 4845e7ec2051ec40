"""Dense realizations of the linearized operators and their spectra.

Two operators are assembled with Fourier differentiation matrices:

* around a soliton, ``-z'' + c z - p Q_c^{p-1} z``;
* around an mKdV breather, the fourth-order operator whose quadratic form
  is the second variation of ``F + 2(b^2-a^2) E + (a^2+b^2)^2 M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .grid import Field, GridSpec
from .profiles import (
    BreatherParams,
    SolitonParams,
    breather_derivative,
    soliton_profile,
)

__all__ = [
    "LinearizedOperator",
    "SpectralReport",
    "ResolutionError",
    "WronskianInconsistency",
    "differentiation_matrix",
    "assemble_soliton_operator",
    "assemble_breather_operator",
    "eigen_report",
    "ground_state",
    "coercivity_constant",
    "sobolev_gram",
    "wronskian_determinant",
    "wronskian_direct",
    "wronskian_negative_count",
]

TOL_ZERO = 1e-6
POINTS_PER_WIDTH = 32


class ResolutionError(ValueError):
    """Grid too coarse for the profile width."""


class WronskianInconsistency(RuntimeError):
    """More than one sign change of the Wronskian was found."""


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    kind: str
    matrix: np.ndarray
    grid: GridSpec
    params: object
    t: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m = np.ascontiguousarray(0.5 * (m + m.T))
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, f: Field) -> Field:
        return Field(self.grid, self.matrix @ f.values, f.time)

    def form(self, f: Field, g: Field | None = None) -> float:
        g = f if g is None else g
        return float(self.grid.spacing * f.values @ self.matrix @ g.values)

    @property
    def scale(self) -> float:
        """Magnitude used to classify eigenvalues as zero.

        The largest diagonal entry for the second-order operator; its square
        root for the fourth-order one, so that both scale like k_max^2.
        """
        d = float(np.max(np.abs(np.diag(self.matrix))))
        return d if self.kind == "soliton" else float(np.sqrt(d))

    @property
    def tol_zero(self) -> float:
        return TOL_ZERO * self.scale


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple
    negative_count: int
    lambda0: float
    kernel_alignments: tuple
    spectrum_edge: float
    near_zero: tuple = ()
    continuum_estimate: float | None = None
    ground_state: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "negative_count": int(self.negative_count),
            "lambda0": float(self.lambda0),
            "kernel_alignments": [float(v) for v in self.kernel_alignments],
            "spectrum_edge": float(self.spectrum_edge),
            "near_zero": [float(v) for v in self.near_zero],
            "continuum_estimate": None
            if self.continuum_estimate is None
            else float(self.continuum_estimate),
        }


def differentiation_matrix(grid: GridSpec, order: int) -> np.ndarray:
    """Real N x N matrix of the Fourier multiplier (ik)^order."""
    n = grid.num_points
    mult = (1j * grid.wavenumbers) ** order
    if order % 2:
        mult = mult.copy()
        mult[n // 2] = 0.0
    return np.ascontiguousarray(
        np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0).real
    )


def _check_resolution(grid: GridSpec, width: float, label: str) -> None:
    if grid.spacing > width / POINTS_PER_WIDTH:
        raise ResolutionError(
            f"{label}: spacing {grid.spacing:.4g} exceeds width/{POINTS_PER_WIDTH} "
            f"= {width / POINTS_PER_WIDTH:.4g}"
        )


def assemble_soliton_operator(
    params: SolitonParams, grid: GridSpec, with_potential: bool = True
) -> LinearizedOperator:
    _check_resolution(grid, 1.0 / np.sqrt(params.c), "soliton operator")
    m = -differentiation_matrix(grid, 2) + params.c * np.eye(grid.num_points)
    if with_potential:
        q = soliton_profile(params, grid).values
        m[np.diag_indices_from(m)] -= params.p * q ** (params.p - 1)
    return LinearizedOperator("soliton", m, grid, params)


def breather_coefficients(params: BreatherParams, t: float, grid: GridSpec):
    """Multiplier of z_x inside the divergence and the zeroth-order potential."""
    a, b = params.alpha, params.beta
    B = breather_derivative(params, t, grid).values
    Bx = breather_derivative(params, t, grid, nx=1).values
    Bxx = breather_derivative(params, t, grid, nx=2).values
    pot = 5 * Bx**2 + 10 * B * Bxx + 7.5 * B**4 - 6 * (b * b - a * a) * B**2
    return 5 * B**2, pot


def assemble_breather_operator(
    params: BreatherParams, t: float, grid: GridSpec, with_potential: bool = True
) -> LinearizedOperator:
    _check_resolution(grid, 1.0 / params.beta, "breather operator")
    a, b = params.alpha, params.beta
    n = grid.num_points
    d1 = differentiation_matrix(grid, 1)
    m = (
        differentiation_matrix(grid, 4)
        - 2 * (b * b - a * a) * differentiation_matrix(grid, 2)
        + (a * a + b * b) ** 2 * np.eye(n)
    )
    if with_potential:
        w, pot = breather_coefficients(params, t, grid)
        m += d1 @ (w[:, None] * d1)
        m[np.diag_indices_from(m)] += pot
    return LinearizedOperator("breather", m, grid, (params, t))


def _edge(op: LinearizedOperator) -> float:
    if op.kind == "soliton":
        return float(op.params.c)
    bp = op.params[0]
    a, b = bp.alpha, bp.beta
    return float(min((a * a + b * b) ** 2, 4 * a * a * b * b))


def _continuum_estimate(evals: np.ndarray, n_bound: int) -> float:
    """First eigenvalue above the negative and near-zero ones."""
    return float(evals[n_bound]) if n_bound < len(evals) else float("nan")


def eigen_report(op: LinearizedOperator, k: int = 6, analytic_kernel=()) -> SpectralReport:
    n = op.grid.num_points
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..N")
    try:
        evals, evecs = sla.eigh(op.matrix)
    except sla.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    tol = op.tol_zero
    neg = int(np.sum(evals < -tol))
    zero_idx = np.flatnonzero(np.abs(evals) <= tol)
    aligns = []
    if len(analytic_kernel):
        m = len(analytic_kernel)
        near = np.argsort(np.abs(evals))[:m]
        basis = evecs[:, near]
        for f in analytic_kernel:
            v = np.asarray(f.values, dtype=float)
            aligns.append(float(np.linalg.norm(basis.T @ v) / np.linalg.norm(v)))
    cont = _continuum_estimate(evals, neg + len(zero_idx))
    return SpectralReport(
        eigenvalues=tuple(float(v) for v in evals[:k]),
        negative_count=neg,
        lambda0=float(-evals[0]) if evals[0] < -tol else 0.0,
        kernel_alignments=tuple(aligns),
        spectrum_edge=_edge(op),
        near_zero=tuple(float(evals[i]) for i in zero_idx),
        continuum_estimate=cont,
        ground_state=evecs[:, 0] / np.sqrt(op.grid.spacing),
    )


def ground_state(op: LinearizedOperator) -> Field:
    """L^2-normalized eigenfunction of the lowest eigenvalue, positive at its peak."""
    _, v = sla.eigh(op.matrix, subset_by_index=[0, 0])
    v = v[:, 0] / np.sqrt(op.grid.spacing)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return Field(op.grid, v)


def _complement_basis(constraints, n: int) -> np.ndarray:
    if not constraints:
        return np.eye(n)
    c = np.column_stack([np.asarray(f.values, dtype=float) for f in constraints])
    q, r = np.linalg.qr(c, mode="complete")
    diag = np.abs(np.diag(r))
    if diag.min() < 1e-10 * diag.max():
        raise ValueError("constraints are rank deficient on the grid")
    return q[:, c.shape[1]:]


def sobolev_gram(grid: GridSpec, s: float) -> np.ndarray:
    """Matrix G with h v^T G v = ||v||_{H^s}^2."""
    mult = (1.0 + grid.wavenumbers**2) ** s
    g = np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(grid.num_points), axis=0), axis=0).real
    return np.ascontiguousarray(0.5 * (g + g.T))


def coercivity_constant(
    op: LinearizedOperator,
    constraints=(),
    sobolev_index: float = 0.0,
    penalty: Field | None = None,
    penalty_weight: float = 0.0,
) -> float:
    """Minimum of <z, L z> / ||z||^2 over z orthogonal to the constraints.

    The norm is L^2 by default and H^s when ``sobolev_index`` is positive.
    An optional rank-one term ``penalty_weight * <penalty, z>^2`` is added to
    the form before minimizing.
    """
    n = op.grid.num_points
    z = _complement_basis(list(constraints), n)
    a = op.matrix
    if penalty is not None and penalty_weight:
        pv = np.asarray(penalty.values, dtype=float)
        a = a + penalty_weight * op.grid.spacing * np.outer(pv, pv)
    red = z.T @ a @ z
    red = 0.5 * (red + red.T)
    if sobolev_index:
        g = z.T @ sobolev_gram(op.grid, sobolev_index) @ z
        return float(sla.eigh(red, 0.5 * (g + g.T), eigvals_only=True, subset_by_index=[0, 0])[0])
    return float(sla.eigh(red, eigvals_only=True, subset_by_index=[0, 0])[0])


# ------------------------------------------------------------ Wronskian


def wronskian_determinant(params: BreatherParams, t: float, x) -> np.ndarray:
    """Closed-form det of [[B1, B2], [B1', B2']] written without overflow.

    Its sign is that of b sin(2 a y1) - a sinh(2 b y2); the roots are the
    zeros of that combination.
    """
    a, b = params.alpha, params.beta
    x = np.asarray(x, dtype=float)
    y1 = x + params.delta * t + params.x1
    y2 = x + params.gamma * t + params.x2
    eta = b * y2
    e = np.exp(-2 * np.abs(eta))
    sgn = np.sign(eta)
    th = 2 * a * y1
    num = 2 * e * (a * sgn * (1 - e * e) - 2 * e * b * np.sin(th))
    den = (2 * e * (a * a + b * b - b * b * np.cos(th)) + a * a * (1 + e * e)) ** 2
    return -16 * a**3 * b**3 * (a * a + b * b) * num / den


def wronskian_direct(params: BreatherParams, t: float, grid: GridSpec) -> np.ndarray:
    b1 = breather_derivative(params, t, grid, n1=1).values
    b2 = breather_derivative(params, t, grid, n2=1).values
    b1x = breather_derivative(params, t, grid, nx=1, n1=1).values
    b2x = breather_derivative(params, t, grid, nx=1, n2=1).values
    return b1 * b2x - b2 * b1x


def wronskian_negative_count(params: BreatherParams, t: float = 0.0, samples: int = 20001):
    """Count sign changes of the Wronskian and locate the root.

    Sign changes of ``a sinh(2 b y2) - b sin(2 a y1)`` can only occur where
    ``|sinh(2 b y2)| <= b/a``, which bounds the scan window.
    """
    a, b = params.alpha, params.beta
    half = np.arcsinh(b / a) / (2 * b)
    pad = max(half, 1.0) * 0.5
    centre = -params.gamma * t - params.x2
    xs = np.linspace(centre - half - pad, centre + half + pad, samples)

    def f(x):
        y1 = x + params.delta * t + params.x1
        y2 = x + params.gamma * t + params.x2
        return a * np.sinh(2 * b * y2) - b * np.sin(2 * a * y1)

    vals = f(xs)
    # samples within roundoff of zero carry no sign; a crossing through one of
    # them (the triple root at x1 = x2, a = b) is bracketed by its neighbours
    tiny = 1e-14 * np.max(np.abs(vals))
    idx = np.flatnonzero(np.abs(vals) > tiny)
    sg = np.sign(vals[idx])
    roots = []
    for i in np.flatnonzero(sg[:-1] != sg[1:]):
        lo, hi = xs[idx[i]], xs[idx[i + 1]]
        roots.append(float(brentq(f, lo, hi, xtol=1e-14)))
    if len(roots) != 1:
        raise WronskianInconsistency(f"found {len(roots)} sign changes: {roots}")
    return len(roots), roots[0]
