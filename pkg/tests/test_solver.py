import concurrent.futures as cf

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solitonlab.grid import Field, GridSpec, wrap
from solitonlab.profiles import BreatherParams, breather_profile, soliton_values
from solitonlab.solver import (
    AccuracyLoss,
    Blowup,
    EvolveConfig,
    conserved_quantities,
    evolve,
    scaling_laws_check,
)

G = GridSpec(60.0, 512)


def _bump(p, amp=0.0):
    return Field(G, soliton_values(G.x, p) + amp * np.exp(-((G.x - 3.0) ** 2)))


def _mirror(f: Field) -> Field:
    """x -> -x on the periodic grid (index i -> -i mod N)."""
    return f.with_values(np.roll(f.values[::-1], 1))


def test_config_validation():
    for bad in (dict(p=5), dict(p=2, dt=0.0), dict(p=3, snapshot_stride=0)):
        with pytest.raises(ValueError):
            EvolveConfig(**bad)


def test_rejects_complex_data():
    with pytest.raises(ValueError):
        evolve(Field(G, soliton_values(G.x, 2) + 1e-3j), EvolveConfig(2))


@pytest.mark.parametrize("p", [2, 3, 4])
def test_conservation(p):
    traj = evolve(_bump(p, 0.05), EvolveConfig(p, 1e-3, 2.0, 250))
    q = np.array(traj.conserved_log)
    assert np.max(np.abs(q / q[0] - 1)) < 1e-8
    assert q.shape[1] == (3 if p == 3 else 2)


def test_snapshot_times():
    traj = evolve(_bump(2), EvolveConfig(2, 1e-3, 0.55, 100))
    t = traj.times
    assert np.all(np.diff(t) > 0)
    assert t[0] == 0.0 and t[-1] == pytest.approx(0.55, abs=1e-14)
    assert traj.conserved_array().shape == (len(t), 3)


def test_time_reversal():
    """u(T, -x) evolved for T returns u0(-x)."""
    u0 = _bump(2, 0.3)
    uT = evolve(u0, EvolveConfig(2, 1e-3, 2.0, 10**6)).snapshots[-1]
    back = evolve(Field(G, _mirror(uT).values), EvolveConfig(2, 1e-3, 2.0, 10**6)).snapshots[-1]
    assert np.max(np.abs(_mirror(back).values - u0.values)) < 1e-7


@pytest.mark.parametrize("p", [2, 3])
def test_fourth_order_in_time(p):
    T = 2.0
    exact = soliton_values(wrap(G.x - T, G.domain_length), p)
    errs = []
    for dt in (0.05, 0.025):
        u = evolve(_bump(p), EvolveConfig(p, dt, T, 10**6, guard=1.0)).snapshots[-1]
        errs.append(np.max(np.abs(u.values - exact)))
    assert errs[0] / errs[1] >= 8


def test_moving_frame():
    v, T = 0.7, 1.5
    u0 = _bump(3, 0.1)
    lab = evolve(u0, EvolveConfig(3, 1e-3, T, 10**6)).snapshots[-1]
    box = evolve(u0, EvolveConfig(3, 1e-3, T, 10**6, frame_speed=v)).snapshots[-1]
    # the box field at x equals the lab field at x + vT
    shift = np.fft.ifft(np.fft.fft(lab.values) * np.exp(1j * G.wavenumbers * v * T)).real
    assert np.max(np.abs(box.values - shift)) < 1e-9


def test_breather_in_envelope_frame():
    bp = BreatherParams(1.0, 1.0)
    g = GridSpec(50.0, 1024)
    T = 0.5
    box = evolve(
        breather_profile(bp, 0.0, g), EvolveConfig(3, 2.5e-4, T, 10**6, frame_speed=-bp.gamma)
    ).snapshots[-1]
    # box field at x is the lab field at x - gamma T
    lab = breather_profile(bp.replace(x1=bp.x1 - bp.gamma * T, x2=bp.x2 - bp.gamma * T), T, g)
    assert np.max(np.abs(box.values - lab.values)) < 1e-8


def test_accuracy_guard():
    with pytest.raises(AccuracyLoss):
        evolve(_bump(4, 0.2), EvolveConfig(4, 0.2, 2.0, 1, guard=1e-14))


def test_blowup_detected():
    g = GridSpec(20.0, 256)
    big = Field(g, 40.0 * np.exp(-4 * g.x**2))
    with np.errstate(all="ignore"), pytest.raises((Blowup, AccuracyLoss)):
        evolve(big, EvolveConfig(4, 0.05, 1.0, 1, dealias=False, guard=np.inf))


def test_p4_dealiasing_leaves_top_third_linear():
    """Modes above the 2/3 cutoff only rotate in phase: the quartic term never reaches them."""
    u0 = _bump(4, 0.1)
    uT = evolve(u0, EvolveConfig(4, 1e-3, 0.5, 500)).snapshots[-1]
    n = G.num_points
    j = np.fft.rfftfreq(n) * n
    top = (j >= n / 3) & (j < n / 2)  # the Nyquist coefficient is real-only
    s0 = np.abs(np.fft.rfft(u0.values))[top]
    sT = np.abs(np.fft.rfft(uT.values))[top]
    assert np.max(np.abs(sT - s0)) < 1e-12


def test_thread_determinism():
    cfg = EvolveConfig(4, 1e-3, 0.3, 100)
    serial = [evolve(_bump(4, a), cfg).snapshots[-1].values for a in (0.0, 0.1)]
    with cf.ThreadPoolExecutor(2) as pool:
        par = list(pool.map(lambda a: evolve(_bump(4, a), cfg).snapshots[-1].values, (0.0, 0.1)))
    for s, q in zip(serial, par):
        assert s.tobytes() == q.tobytes()


@pytest.mark.parametrize("p", [2, 3, 4])
def test_scaling_laws(p):
    rep = scaling_laws_check(p, [0.5, 1.0, 2.0])
    assert rep["max_rel_deviation"] < 1e-8
    assert rep["theta"] == pytest.approx(2 / (p - 1) + 0.5)


def test_F_only_for_mkdv():
    with pytest.raises(ValueError):
        conserved_quantities(_bump(2), 2, with_F=True)


@given(a=st.floats(0.0, 0.2), p=st.sampled_from([2, 3]))
def test_mass_conserved_for_bumps(a, p):
    traj = evolve(_bump(p, a), EvolveConfig(p, 2e-3, 0.2, 100, guard=1.0))
    m = np.array([q[0] for q in traj.conserved_log])
    assert np.max(np.abs(m / m[0] - 1)) < 1e-10
