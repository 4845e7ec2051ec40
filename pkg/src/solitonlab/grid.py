"""Periodic grid, Fourier differentiation, Sobolev norms and quadrature.

Every profile in the package decays exponentially, so the real line is
replaced by a periodic box ``[-L/2, L/2)`` that is wide enough for the
tails to be negligible.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson

__all__ = [
    "GridSpec",
    "Field",
    "BoundaryTailWarning",
    "spectral_derivative",
    "sobolev_norm",
    "inner_product",
    "antiderivative",
    "wrap",
    "write_csv",
    "read_csv",
    "save_field",
    "load_field",
]

MAX_DERIVATIVE_ORDER = 4
TAIL_WARN = 1e-8


class BoundaryTailWarning(UserWarning):
    """Integrand is not small at the left edge of the box."""


@dataclass(frozen=True)
class GridSpec:
    domain_length: float
    num_points: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        n = int(self.num_points)
        if n != self.num_points or n < 2 or n & (n - 1):
            raise ValueError("num_points must be a power of two")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def spacing(self) -> float:
        return self.domain_length / self.num_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -0.5 * self.domain_length + self.spacing * np.arange(self.num_points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order."""
        k = 2 * np.pi * np.fft.fftfreq(self.num_points, d=self.spacing)
        k.flags.writeable = False
        return k

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask over full-FFT modes kept by the truncation rule."""
        j = np.abs(np.fft.fftfreq(self.num_points) * self.num_points)
        m = j < 0.5 * self.dealias_fraction * self.num_points
        m.flags.writeable = False
        return m

    def to_dict(self) -> dict:
        return {
            "domain_length": float(self.domain_length),
            "num_points": int(self.num_points),
            "dealias_fraction": float(self.dealias_fraction),
        }


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a real or complex function on a periodic grid."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    real: bool = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.num_points,):
            raise ValueError(
                f"expected {self.grid.num_points} samples, got shape {v.shape}"
            )
        is_real = not np.iscomplexobj(v) if self.real is None else bool(self.real)
        if is_real:
            if np.iscomplexobj(v):
                if np.any(v.imag != 0):
                    raise ValueError("field flagged real has nonzero imaginary part")
                v = v.real
            v = v.astype(float, copy=True)
        else:
            v = v.astype(complex, copy=True)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "real", is_real)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def _other(self, other):
        if isinstance(other, Field):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def wrap(s: np.ndarray, length: float) -> np.ndarray:
    """Map coordinates to the periodic representative in [-L/2, L/2)."""
    return (np.asarray(s) + 0.5 * length) % length - 0.5 * length


def _same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def _check_finite(f: Field) -> None:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field contains non-finite values")


def derivative_values(values: np.ndarray, grid: GridSpec, order: int = 1) -> np.ndarray:
    """Array-level Fourier derivative; the Nyquist mode is dropped for odd orders."""
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2:
        mult = mult.copy()
        mult[grid.num_points // 2] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(values))
    return out.real if not np.iscomplexobj(values) else out


def spectral_derivative(f: Field, order: int = 1) -> Field:
    order = int(order)
    if order < 1:
        raise ValueError("order must be a positive integer")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {order} > {MAX_DERIVATIVE_ORDER} unsupported")
    _check_finite(f)
    return f.with_values(derivative_values(f.values, f.grid, order))


def sobolev_norm(f: Field, s: float = 0.0) -> float:
    if s < 0:
        raise ValueError("Sobolev index must be nonnegative")
    g = f.grid
    fh = np.fft.fft(f.values)
    w = (1.0 + g.wavenumbers**2) ** s
    return float(np.sqrt(g.domain_length * np.sum(w * np.abs(fh) ** 2)) / g.num_points)


def sobolev_inner(f: Field, g: Field, s: float = 0.0) -> float:
    """Real H^s pairing of two real fields."""
    _same_grid(f, g)
    gr = f.grid
    w = (1.0 + gr.wavenumbers**2) ** s
    val = np.sum(w * np.fft.fft(f.values) * np.conj(np.fft.fft(g.values)))
    return float(val.real * gr.domain_length / gr.num_points**2)


def inner_product(f: Field, g: Field):
    """Bilinear (unconjugated) pairing with weight h."""
    _same_grid(f, g)
    val = f.grid.spacing * np.sum(f.values * g.values)
    return complex(val) if np.iscomplexobj(val) else float(val)


def antiderivative(f: Field, method: str = "simpson") -> Field:
    """Cumulative integral from the left edge of the box.

    ``simpson`` is composite Simpson quadrature. ``spectral`` splits f into
    I * step' plus a zero-mean periodic remainder, where I is the total
    integral and step a smooth tanh step centred in the box; the remainder
    is integrated by Fourier division. It is exact to rounding for
    localized integrands with nonzero mean.
    """
    v = f.values
    if abs(v[0]) > TAIL_WARN:
        warnings.warn(
            f"left-boundary value {abs(v[0]):.2e} exceeds {TAIL_WARN:g}",
            BoundaryTailWarning,
            stacklevel=2,
        )
    g = f.grid
    h = g.spacing
    if method == "spectral":
        width = g.domain_length / 40.0
        s = g.x / width
        step = 0.5 * (1.0 + np.tanh(s))
        dstep = 0.5 / (width * np.cosh(s) ** 2)
        total = h * np.sum(v)
        rest = np.fft.fft(v - total * dstep)
        k = g.wavenumbers
        out = np.zeros_like(rest)
        nz = k != 0
        out[nz] = rest[nz] / (1j * k[nz])
        out[g.num_points // 2] = 0.0
        prim = np.fft.ifft(out)
        if not np.iscomplexobj(v):
            prim = prim.real
        prim = prim + total * step
        return f.with_values(prim - prim[0])
    if method != "simpson":
        raise ValueError("method must be 'simpson' or 'spectral'")
    if np.iscomplexobj(v):
        out = cumulative_simpson(v.real, dx=h, initial=0) + 1j * cumulative_simpson(
            v.imag, dx=h, initial=0
        )
    else:
        out = cumulative_simpson(v, dx=h, initial=0)
    return f.with_values(out)


# ---------------------------------------------------------------- I/O


def write_csv(f: Field, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value_re"] + ([] if f.real else ["value_im"]))
        for xi, vi in zip(f.grid.x, f.values):
            row = [repr(float(xi)), repr(float(np.real(vi)))]
            if not f.real:
                row.append(repr(float(np.imag(vi))))
            w.writerow(row)
    return path


def read_csv(path, time: float = 0.0, dealias_fraction: float = 2.0 / 3.0) -> Field:
    """Rebuild a field from CSV; the box length is inferred from the x column."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    n = data.shape[0]
    h = data[1, 0] - data[0, 0]
    grid = GridSpec(h * n, n, dealias_fraction)
    vals = data[:, 1] if len(header) == 2 else data[:, 1] + 1j * data[:, 2]
    return Field(grid, vals, time)


def save_field(f: Field, path) -> Path:
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(
            fh,
            values=f.values,
            domain_length=f.grid.domain_length,
            num_points=f.grid.num_points,
            dealias_fraction=f.grid.dealias_fraction,
            time=f.time,
        )
    return path


def load_field(path) -> Field:
    with np.load(Path(path)) as d:
        grid = GridSpec(
            float(d["domain_length"]), int(d["num_points"]), float(d["dealias_fraction"])
        )
        return Field(grid, d["values"], float(d["time"]))
