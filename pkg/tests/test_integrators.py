import math

import numpy as np
import pytest
from scipy.linalg import expm

import skmanifold.integrators as integ
from skmanifold.integrators import BlowUpError, CoupledParams, run_coupled, step_heat, step_wave
from skmanifold.ou import NoisePath
from skmanifold.spectral import Nonlinearity, QSpectrum

Z = np.zeros((6, 4))


def test_wave_linear_mode_exact():
    Q0 = QSpectrum.zeros(6)
    u = np.zeros(6)
    u[3] = 1.0
    ut = np.zeros(6)
    for _ in range(100):
        u, ut = step_wave(u, ut, Z, 1e-3, 0.01, Nonlinearity.zero(), Q0)
    assert abs(u[3] - (4 / 3 * math.exp(-2) - 1 / 3 * math.exp(-8))) < 1e-13


def test_heat_linear_decay_exact():
    Q0 = QSpectrum.zeros(6)
    u = np.ones(6)
    for _ in range(50):
        u = step_heat(u, Z, 0.01, Nonlinearity.zero(), Q0)
    np.testing.assert_allclose(u, np.exp(-np.arange(1, 7) ** 2 * 0.5), rtol=1e-12)


def _wave_linear_reference(a, nu, k, u0, T):
    X = np.array([[0.0, 1.0], [(a - k * k) / nu, -1.0 / nu]])
    return (expm(X * T) @ np.array([u0, 0.0]))[0]


def test_wave_heun_second_order():
    # with f(u) = a u the mode decouples: compare with the exact 2x2 exponential
    a, nu, T = 0.8, 0.05, 0.4
    f = Nonlinearity.linear(a)
    Q0 = QSpectrum.zeros(6)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        u = np.zeros(6)
        u[1] = 1.0
        ut = np.zeros(6)
        for _ in range(int(round(T / dt))):
            u, ut = step_wave(u, ut, Z, dt, nu, f, Q0)
        errs.append(abs(u[1] - _wave_linear_reference(a, nu, 2, 1.0, T)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_heat_exponential_euler_first_order():
    a, T = 0.8, 0.5
    f = Nonlinearity.linear(a)
    Q0 = QSpectrum.zeros(6)
    exact = math.exp((a - 4.0) * T)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        u = np.zeros(6)
        u[1] = 1.0
        for _ in range(int(round(T / dt))):
            u = step_heat(u, Z, dt, f, Q0)
        errs.append(abs(u[1] - exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 0.9) & (rates < 1.2))


def test_coupled_run_shares_noise_and_matches_single_steps():
    Q = QSpectrum.power_law(6)
    f = Nonlinearity.sine(0.5)
    noise = NoisePath(8, 1e-3, 6)
    u0 = np.zeros(6)
    u0[0] = 0.3
    wave, heat, stats = run_coupled(u0, np.zeros(6), CoupledParams(0.01, f, Q), noise, 0.05)
    u = u0.copy()
    nrm = noise.normals(0, 50)
    for i in range(50):
        u = step_heat(u, nrm[i], 1e-3, f, Q)
    np.testing.assert_allclose(heat.u[-1], u, rtol=1e-14)
    assert stats["sup_diff"] == pytest.approx(np.max(np.linalg.norm(wave.u - heat.u, axis=-1)))
    assert wave.params["nu"] == 0.01 and heat.params["nu"] is None


def test_replicas_match_single_runs():
    Q = QSpectrum.power_law(6)
    f = Nonlinearity.sine(0.5)
    batch = NoisePath(8, 1e-3, 6, replicas=3)
    _, _, stats = run_coupled(np.zeros(6), np.zeros(6), CoupledParams(0.01, f, Q), batch, 0.02, store_fields=False)
    assert stats["sup_diff"].shape == (3,) and not stats["blown"].any()


def test_small_nu_shrinks_the_difference():
    Q = QSpectrum.power_law(6)
    f = Nonlinearity.sine(0.5)
    sups = []
    for nu in (0.1, 0.01, 0.001):
        _, _, s = run_coupled(np.zeros(6), np.zeros(6), CoupledParams(nu, f, Q), NoisePath(3, 1e-3, 6, 20), 0.5,
                              store_fields=False)
        sups.append(s["sup_diff"].mean())
    assert sups[0] > sups[1] > sups[2]


def test_blow_up_detection(monkeypatch):
    monkeypatch.setattr(integ, "BLOWUP_LIMIT", 1e-3)
    Q = QSpectrum.power_law(6)
    f = Nonlinearity.sine(0.5)
    u0 = np.full(6, 0.1)
    with pytest.raises(BlowUpError):
        run_coupled(u0, np.zeros(6), CoupledParams(0.01, f, Q), NoisePath(1, 1e-3, 6), 0.01)
    _, _, s = run_coupled(u0, np.zeros(6), CoupledParams(0.01, f, Q), NoisePath(1, 1e-3, 6, 4), 0.01)
    assert s["blown"].all() and np.isnan(s["sup_diff"]).all()


def test_argument_checks():
    Q = QSpectrum.power_law(6)
    with pytest.raises(ValueError):
        run_coupled(np.zeros(6), np.zeros(6), CoupledParams(0.01, Nonlinearity.zero(), Q), NoisePath(1, 2e-3, 6), 0.1)
    with pytest.raises(ValueError):
        step_wave(np.zeros(6), np.zeros(6), Z, 1e-3, 0.0, Nonlinearity.zero(), Q)
