import numpy as np
import pytest

from solitonlab.backlund import (
    BacklundPair,
    InconsistentPrimitive,
    backlund_residual,
    backlund_time_residual,
    breather_identity_residuals,
    elliptic_residual,
    lyapunov_H,
    lyapunov_expansion_ratio,
    primitive_mismatch,
    soliton_breather_pair,
    vacuum_soliton_pair,
)
from solitonlab.grid import Field, GridSpec, sobolev_norm
from solitonlab.profiles import (
    BreatherParams,
    SingularShift,
    breather_primitive,
    breather_profile,
    complex_soliton,
)
from solitonlab.solver import EvolveConfig, evolve
from solitonlab.spectral import assemble_breather_operator

G = GridSpec(100.0, 2048)
SUP = lambda f: float(np.max(np.abs(f.values)))  # noqa: E731

PARAMS = [
    BreatherParams(1.0, 1.0),
    BreatherParams(2.0, 1.0),
    BreatherParams(1.5, 1.0),
    BreatherParams(1.5, 1.0, 0.3, -0.2),
]


@pytest.mark.parametrize("bp", PARAMS + [BreatherParams(1.0, 1.0, 5.0, -3.0)])
@pytest.mark.parametrize("t", [0.0, 0.3])
def test_identities(bp, t):
    r = breather_identity_residuals(bp, t, G)
    assert set(r) == {"r_first", "r_second", "r_nonlocal", "r_elliptic"}
    assert max(r.values()) < 1e-7


def test_elliptic_discriminates_gaussian():
    bp = BreatherParams(1.0, 1.0)
    B = breather_profile(bp, 0.0, G)
    mass = np.sum(B.values**2)
    gauss = np.exp(-(G.x**2))
    gauss *= np.sqrt(mass / np.sum(gauss**2))
    assert SUP(elliptic_residual(Field(G, gauss), bp)) > 1e-2


def test_trivial_pair():
    zero = Field(G, np.zeros(G.num_points, complex))
    pair = BacklundPair(zero, zero, zero, zero, 1.0 + 2.0j)
    assert SUP(backlund_residual(pair)) == 0.0
    assert SUP(backlund_time_residual(pair, zero, zero)) == 0.0


@pytest.mark.parametrize("bp", PARAMS + [BreatherParams(1.0, 1.0, 4.0, -3.0)])
def test_vacuum_to_soliton(bp):
    pair, qt, zero = vacuum_soliton_pair(bp, G)
    assert SUP(backlund_residual(pair)) < 1e-9
    assert SUP(backlund_time_residual(pair, qt, zero)) < 1e-8


@pytest.mark.parametrize("bp", PARAMS + [BreatherParams(1.0, 1.0, 4.0, -3.0)])
def test_soliton_to_breather(bp):
    pair, bt, qt = soliton_breather_pair(bp, G)
    assert SUP(backlund_residual(pair)) < 1e-9
    assert SUP(backlund_time_residual(pair, bt, qt)) < 1e-8


def test_spectral_fallback_for_x_derivative():
    """Without closed-form u_x the spectral derivative still gives a small residual."""
    bp = BreatherParams(1.0, 1.0)
    pair, bt, qt = soliton_breather_pair(bp, G)
    bare = BacklundPair(pair.u_a, pair.u_a_tilde, pair.u_b, pair.u_b_tilde, pair.m)
    assert SUP(backlund_time_residual(bare, bt, qt)) < 1e-3


def test_wrong_primitive_rejected():
    bp = BreatherParams(1.0, 1.0)
    B = breather_profile(bp, 0.0, G)
    Bt = breather_primitive(bp, 0.0, G)
    zero = Field(G, np.zeros(G.num_points))
    with pytest.raises(InconsistentPrimitive):
        BacklundPair(B, 1.1 * Bt, zero, zero, 1.0)
    with pytest.raises(ValueError):
        BacklundPair(B, Field(G, np.zeros(G.num_points)), zero, zero, 1.0)
    assert primitive_mismatch(B, Bt) < 1e-12


def test_wrong_m_is_detected():
    bp = BreatherParams(1.0, 1.0)
    qt, q, _ = complex_soliton(bp, G)
    zero = Field(G, np.zeros(G.num_points, complex))
    bad = BacklundPair(q, qt, zero, zero, bp.beta - 1j * bp.alpha)
    assert SUP(backlund_residual(bad)) > 1e-2


def test_translation_covariance():
    bp = BreatherParams(1.5, 1.0, 0.3, -0.2)
    pair, bt, qt = soliton_breather_pair(bp, G)
    k = 37
    roll = lambda f: Field(G, np.roll(f.values, k))  # noqa: E731
    moved = BacklundPair(
        roll(pair.u_a), roll(pair.u_a_tilde), roll(pair.u_b), roll(pair.u_b_tilde), pair.m,
        u_a_x=roll(pair.u_a_x), u_b_x=roll(pair.u_b_x),
    )
    assert np.array_equal(backlund_residual(moved).values, np.roll(backlund_residual(pair).values, k))
    assert np.array_equal(
        backlund_time_residual(moved, roll(bt), roll(qt)).values,
        np.roll(backlund_time_residual(pair, bt, qt).values, k),
    )


def test_conjugation_symmetry():
    bp = BreatherParams(1.0, 1.0, 0.4, 0.1)
    pair, _, _ = vacuum_soliton_pair(bp, G)
    conj = lambda f: Field(G, np.conj(f.values))  # noqa: E731
    other = BacklundPair(conj(pair.u_a), conj(pair.u_a_tilde), pair.u_b, pair.u_b_tilde, np.conj(pair.m))
    assert np.array_equal(backlund_residual(other).values, np.conj(backlund_residual(pair).values))


def test_singular_shift_detection():
    a = 1.0
    period = np.pi / a
    peaks = []
    for frac in (1e-1, 3e-2, 1e-2, 3e-3):
        bp = BreatherParams(a, 1.0, 0.5 * period + frac * period, 0.0)
        q = complex_soliton(bp, GridSpec(100.0, 2 ** 15))[1]
        assert np.all(np.isfinite(q.values))
        peaks.append(SUP(q) * frac)
    # |Q| grows like one over the distance to the set
    assert max(peaks) / min(peaks) < 3
    for frac in (5e-4, 0.0):
        with pytest.raises(SingularShift):
            complex_soliton(BreatherParams(a, 1.0, 0.5 * period + frac * period, 0.0), G)


def test_phase_guard():
    big = Field(G, np.full(G.num_points, 200j))
    zero = Field(G, np.zeros(G.num_points, complex))
    # a constant is a valid primitive of zero, however large its imaginary part
    pair = BacklundPair(zero, big, zero, zero, 1.0)
    with pytest.raises(OverflowError):
        backlund_residual(pair)


# ------------------------------------------------------------- Lyapunov


def test_H_vanishes_at_zero():
    assert lyapunov_H(Field(G, np.zeros(G.num_points)), BreatherParams(1.0, 1.0)) == 0.0


def test_H_conserved_along_flow():
    bp = BreatherParams(1.0, 1.0)
    g = GridSpec(60.0, 1024)
    u0 = breather_profile(bp, 0.0, g) + Field(g, 0.01 * np.exp(-((g.x - 1) ** 2)))
    traj = evolve(u0, EvolveConfig(3, 2.5e-4, 0.5, 500, frame_speed=-bp.gamma))
    H = np.array([lyapunov_H(s, bp) for s in traj.snapshots])
    assert np.max(np.abs(H / H[0] - 1)) < 1e-7


def test_expansion_ratio_bounded(rng):
    bp = BreatherParams(1.0, 1.0)
    g = GridSpec(32.0, 1024)
    B = breather_profile(bp, 0.0, g)
    op = assemble_breather_operator(bp, 0.0, g)
    for _ in range(5):
        c = rng.standard_normal(3)
        z = Field(g, sum(ci * np.exp(-((g.x - s) ** 2)) for ci, s in zip(c, (-2.0, 0.0, 1.5))))
        z = z * (1.0 / sobolev_norm(z, 2))
        ratios = [lyapunov_expansion_ratio(B, z, eps, bp, op) for eps in (1e-2, 1e-3, 1e-4)]
        assert np.all(np.isfinite(ratios))
        assert max(abs(r) for r in ratios) < 5.0
        # the cubic coefficient is already settled at eps = 1e-2
        assert abs(ratios[0] - ratios[1]) < 0.05
