import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solitonlab.grid import (
    BoundaryTailWarning,
    Field,
    GridSpec,
    antiderivative,
    inner_product,
    load_field,
    read_csv,
    save_field,
    sobolev_norm,
    spectral_derivative,
    write_csv,
)
from solitonlab.profiles import (
    BreatherParams,
    SolitonParams,
    breather_profile,
    soliton_derivative,
    soliton_profile,
)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(10.0, 1000)
    with pytest.raises(ValueError):
        GridSpec(-1.0, 64)
    with pytest.raises(ValueError):
        GridSpec(10.0, 64, dealias_fraction=0.0)
    g = GridSpec(10.0, 64)
    assert g.spacing == pytest.approx(10 / 64)
    k = np.sort(g.wavenumbers)
    assert np.allclose(np.diff(k), 2 * np.pi / 10)


def test_field_shape_and_realness():
    g = GridSpec(10.0, 64)
    with pytest.raises(ValueError):
        Field(g, np.zeros(10))
    with pytest.raises(ValueError):
        Field(g, np.ones(64) * 1j, real=True)
    f = Field(g, np.ones(64, complex))
    assert not f.real
    assert Field(g, np.ones(64)).real
    assert not f.values.flags.writeable


def test_derivative_of_constant_and_mode():
    g = GridSpec(20.0, 128)
    assert np.max(np.abs(spectral_derivative(Field(g, np.ones(128))).values)) < 1e-14
    w = 2 * np.pi / g.domain_length
    d = spectral_derivative(Field(g, np.sin(w * g.x)))
    assert np.max(np.abs(d.values - w * np.cos(w * g.x))) < 1e-13
    assert d.real


def test_derivative_errors():
    g = GridSpec(20.0, 128)
    with pytest.raises(ValueError):
        spectral_derivative(Field(g, np.ones(128)), 5)
    bad = np.ones(128)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        spectral_derivative(Field(g, bad))


def test_soliton_ode_through_spectral_derivative(fine_grid):
    q = soliton_profile(SolitonParams(2, 1.0), fine_grid)
    r = spectral_derivative(q, 2).values - (q.values - q.values**2)
    assert np.max(np.abs(r)) < 1e-10


def test_sobolev_norm_values(fine_grid):
    assert sobolev_norm(Field(fine_grid, np.zeros(4096)), 1) == 0.0
    q1 = soliton_profile(SolitonParams(2, 1.0), fine_grid)
    q4 = soliton_profile(SolitonParams(2, 4.0), fine_grid)
    assert sobolev_norm(q1, 0) ** 2 == pytest.approx(6.0, rel=1e-12)
    assert sobolev_norm(q4, 0) / sobolev_norm(q1, 0) == pytest.approx(4**0.75, rel=1e-8)
    with pytest.raises(ValueError):
        sobolev_norm(q1, -1)


def test_h1_norm_matches_integral(fine_grid):
    q = soliton_profile(SolitonParams(3, 1.0), fine_grid)
    qx = soliton_derivative(SolitonParams(3, 1.0), fine_grid)
    h = fine_grid.spacing
    assert sobolev_norm(q, 1) ** 2 == pytest.approx(h * np.sum(q.values**2 + qx.values**2), rel=1e-12)


def test_inner_product_properties(fine_grid):
    sp = SolitonParams(2, 1.0)
    q, q1 = soliton_profile(sp, fine_grid), soliton_derivative(sp, fine_grid)
    assert inner_product(q, Field(fine_grid, np.zeros(4096))) == 0.0
    assert abs(inner_product(q, q1)) < 1e-14
    assert inner_product(q1, q1) == pytest.approx(6 / 5, rel=1e-12)
    with pytest.raises(ValueError):
        inner_product(q, Field(GridSpec(50.0, 4096), np.zeros(4096)))


def test_antiderivative_quadrature(fine_grid):
    assert np.all(antiderivative(Field(fine_grid, np.zeros(4096))).values == 0)
    q = soliton_profile(SolitonParams(2, 1.0), fine_grid)
    assert antiderivative(q * q).values[-1] == pytest.approx(6.0, rel=1e-10)
    b = breather_profile(BreatherParams(1.5, 1.0), 0.0, fine_grid)
    total = inner_product(b, b)
    assert antiderivative(b * b).values[-1] == pytest.approx(total, abs=1e-8)
    assert antiderivative(b * b, method="spectral").values[-1] == pytest.approx(total, abs=1e-10)


def test_antiderivative_inverts_derivative(fine_grid):
    # zero-mean integrand: the primitive decays at both ends, so it is periodic
    q1 = soliton_derivative(SolitonParams(2, 1.0), fine_grid)
    inner = np.abs(fine_grid.x) < 40
    back = spectral_derivative(antiderivative(q1, method="spectral"))
    assert np.max(np.abs(back.values - q1.values)[inner]) < 1e-6
    # Simpson's alternating odd/even weights leave grid-scale noise of about
    # 2e-8 that differentiation amplifies by 1/h
    back = spectral_derivative(antiderivative(q1))
    assert np.max(np.abs(back.values - q1.values)[inner]) < 5e-6


def test_antiderivative_nonzero_mean_primitive(fine_grid):
    # a nonzero-mean integrand has a step-like primitive; compare its slope by
    # finite differences instead of a periodic derivative
    q = soliton_profile(SolitonParams(2, 1.0), fine_grid)
    prim = antiderivative(q, method="spectral").values
    slope = np.gradient(prim, fine_grid.spacing, edge_order=2)
    assert np.max(np.abs(slope - q.values)) < 1e-3
    assert prim[-1] == pytest.approx(6.0, rel=1e-12)


def test_antiderivative_tail_warning():
    g = GridSpec(20.0, 128)
    with pytest.warns(BoundaryTailWarning):
        antiderivative(Field(g, np.ones(128)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        antiderivative(Field(g, np.exp(-g.x**2)))
    with pytest.raises(ValueError):
        antiderivative(Field(g, np.exp(-g.x**2)), method="fourier")


@given(
    a=st.floats(-5, 5),
    b=st.floats(-5, 5),
    m=st.integers(1, 20),
    order=st.integers(1, 4),
)
def test_derivative_linear(a, b, m, order):
    g = GridSpec(10.0, 128)
    f = Field(g, np.exp(-((g.x - 1) ** 2)))
    h = Field(g, np.cos(2 * np.pi * m * g.x / 10))
    lhs = spectral_derivative(a * f + b * h, order).values
    rhs = a * spectral_derivative(f, order).values + b * spectral_derivative(h, order).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(rhs)))


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=12))
def test_parseval(coeffs):
    g = GridSpec(10.0, 64)
    v = sum(c * np.cos(2 * np.pi * (j + 1) * g.x / 10 + j) for j, c in enumerate(coeffs))
    f = Field(g, v)
    ip = inner_product(f, f)
    assert sobolev_norm(f, 0) ** 2 == pytest.approx(ip, rel=1e-12, abs=1e-13)


def test_csv_and_binary_round_trip(tmp_path):
    g = GridSpec(12.5, 64)
    real = Field(g, np.sin(g.x) * np.exp(-(g.x**2)), time=0.5)
    cplx = Field(g, np.exp(1j * g.x - g.x**2))
    for f in (real, cplx):
        back = read_csv(write_csv(f, tmp_path / "f.csv"), time=f.time)
        assert back.grid == g
        assert np.array_equal(back.values, f.values)
        bin_back = load_field(save_field(f, tmp_path / "f.npz"))
        assert bin_back.grid == g and bin_back.time == f.time
        assert np.array_equal(bin_back.values, f.values)
