import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solitonlab.grid import Field, GridSpec, inner_product, wrap
from solitonlab.modulation import (
    CrossingDetected,
    GuardViolation,
    fit_breather,
    fit_multi,
    fit_single,
    kink,
    localized_mass,
    track_breather,
    track_solitons,
)
from solitonlab.profiles import (
    BreatherParams,
    SolitonParams,
    breather_derivative,
    breather_profile,
    soliton_derivative,
    soliton_profile,
    soliton_values,
)
from solitonlab.solver import EvolveConfig, evolve

G = GridSpec(80.0, 1024)


def _bump(amp, centre=2.0):
    return amp * np.exp(-((G.x - centre) ** 2))


@given(p=st.sampled_from([2, 3, 4]), c=st.floats(0.5, 2.0), rho=st.floats(-20, 20))
def test_single_recovers_exact_parameters(p, c, rho):
    u = soliton_profile(SolitonParams(p, c, rho), G)
    res = fit_single(u, SolitonParams(p, 1.03 * c, rho + 0.1 / np.sqrt(c)), fit_scaling=True)
    assert res.params.c == pytest.approx(c, rel=1e-9)
    assert abs(wrap(res.params.x0 - rho, G.domain_length)) < 1e-9
    assert np.max(np.abs(res.residual.values)) < 1e-9


@pytest.mark.parametrize("fit_scaling", [False, True])
def test_single_orthogonality(fit_scaling):
    u = Field(G, soliton_values(G.x - 1.0, 3, 1.2) + _bump(0.02))
    res = fit_single(u, SolitonParams(3, 1.2, 1.0), fit_scaling=fit_scaling)
    q = res.params
    z = res.residual
    assert abs(inner_product(z, soliton_derivative(q, G))) < 1e-11
    if fit_scaling:
        assert abs(inner_product(z, soliton_profile(q, G))) < 1e-11
    else:
        assert q.c == 1.2


def test_decomposition_reconstructs():
    u = Field(G, soliton_values(G.x + 15, 4, 0.6) + soliton_values(G.x - 15, 4, 1.5) + _bump(0.01))
    fitted, z = fit_multi(u, [SolitonParams(4, 0.6, -15), SolitonParams(4, 1.5, 15)])
    rebuilt = sum(soliton_profile(q, G).values for q in fitted) + z.values
    assert np.max(np.abs(rebuilt - u.values)) < 1e-14


def test_multi_orthogonality():
    u = Field(G, soliton_values(G.x + 15, 4, 0.6) + soliton_values(G.x - 15, 4, 1.5) + _bump(0.03, 0.0))
    res = fit_multi(u, [SolitonParams(4, 0.6, -15), SolitonParams(4, 1.5, 15)])
    for q in res.params:
        assert abs(inner_product(res.residual, soliton_profile(q, G))) < 1e-11
        assert abs(inner_product(res.residual, soliton_derivative(q, G))) < 1e-11
    assert res.params[0].x0 < res.params[1].x0


def test_guard_rejects_far_guess():
    u = soliton_profile(SolitonParams(2, 1.0, 0.0), G)
    with pytest.raises(GuardViolation):
        fit_single(u, SolitonParams(2, 1.0, 10.0))


def test_crossing_detected():
    u = Field(G, soliton_values(G.x + 6, 2, 1.0) + soliton_values(G.x - 6, 2, 2.0))
    # both guesses sit left of the pair and Newton merges them; a generous
    # guard lets the iteration run
    with pytest.raises(CrossingDetected):
        fit_multi(u, [SolitonParams(2, 1.0, -2.0), SolitonParams(2, 2.0, -1.0)], guard=10.0)


def test_fit_across_the_seam():
    L = G.domain_length
    u = soliton_profile(SolitonParams(2, 1.0, 0.5 * L - 0.1), G)
    res = fit_single(u, SolitonParams(2, 1.0, -0.5 * L + 0.1))
    assert abs(wrap(res.params.x0 - (0.5 * L - 0.1), L)) < 1e-9


def test_kink_and_mass():
    assert kink(0.0) == pytest.approx(0.5)
    assert kink(-800.0) == 0.0 and kink(800.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        localized_mass(soliton_profile(SolitonParams(2), G), 0.0, 2.0, 0.0)
    q = soliton_profile(SolitonParams(2, 1.0, 20.0), G)
    total = 0.5 * G.spacing * np.sum(q.values**2)
    assert localized_mass(q, 0.0, 4.0, 0.0) == pytest.approx(total, rel=1e-2)
    assert localized_mass(q, 0.0, 4.0, 0.0, centre=40.0) < 1e-2 * total


def test_track_soliton_in_moving_frame():
    p, c = 2, 1.0
    u0 = soliton_profile(SolitonParams(p, c), G)
    snaps = evolve(u0, EvolveConfig(p, 1e-3, 5.0, 1000, frame_speed=c)).snapshots
    track = track_solitons(snaps, [SolitonParams(p, c)], frame_speed=c)
    assert np.max(np.abs(track.rho(0) - c * np.array(track.times))) < 1e-6
    assert np.max(np.abs(track.c(0) - c)) < 1e-8
    assert max(track.residual_h1) < 1e-6
    rows = track.rows()
    assert set(rows[0]) == {"t", "rho_1", "c_1", "z_H1", "z_H2"}


def test_track_shifts_stay_continuous_past_the_seam():
    g = GridSpec(40.0, 512)
    u0 = soliton_profile(SolitonParams(3, 1.0, 15.0), g)
    snaps = evolve(u0, EvolveConfig(3, 1e-3, 10.0, 1000)).snapshots
    track = track_solitons(snaps, [SolitonParams(3, 1.0, 15.0)])
    rho = track.rho(0)
    assert np.all(np.diff(rho) > 0)
    assert rho[-1] == pytest.approx(25.0, abs=1e-5)


def test_breather_fit_recovers_shifts():
    bp = BreatherParams(1.5, 1.0, 0.3, -0.2)
    g = GridSpec(40.0, 1024)
    u = breather_profile(bp, 0.1, g)
    res = fit_breather(u, bp.replace(x1=0.32, x2=-0.18), 0.1)
    assert res.params.x1 == pytest.approx(0.3, abs=1e-8)
    assert res.params.x2 == pytest.approx(-0.2, abs=1e-8)
    assert np.max(np.abs(res.residual.values)) < 1e-8


def test_breather_track_in_envelope_frame():
    bp = BreatherParams(1.0, 1.0)
    g = GridSpec(60.0, 1024)
    snaps = evolve(
        breather_profile(bp, 0.0, g), EvolveConfig(3, 2.5e-4, 0.5, 1000, frame_speed=-bp.gamma)
    ).snapshots
    track = track_breather(snaps, bp, frame_speed=-bp.gamma)
    assert max(track.residual_h2) < 1e-6
    for row in track.rows():
        assert abs(row["x1_1"]) < 1e-6 and abs(row["x2_1"]) < 1e-6


def test_breather_guard():
    bp = BreatherParams(1.0, 1.0)
    g = GridSpec(40.0, 1024)
    u = breather_derivative(bp, 0.0, g)
    with pytest.raises(GuardViolation):
        fit_breather(u, bp.replace(x2=5.0), 0.0)


def test_newton_stops_at_rounding_floor():
    from solitonlab.modulation import _newton

    calls = []

    def func(x):
        calls.append(1)
        # |F| can never fall below 5e-11, far above tol
        return np.array([1e3 * (x[0] - 1.0) + 5e-11 * (-1) ** len(calls)]), np.array([[1e3]])

    x, F, _, it = _newton(func, [1.3], tol=1e-12, max_iter=50)
    assert x[0] == pytest.approx(1.0, abs=1e-12)
    assert it < 5
