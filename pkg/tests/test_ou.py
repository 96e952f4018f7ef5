import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm, solve_continuous_lyapunov

from skmanifold.ou import (
    NoisePath,
    OUStepper,
    build_path,
    evolve_ou,
    sample_stationary_heat,
    sample_stationary_wave,
    stationary_joint_covariance,
    step_factors,
    wave_generator,
)
from skmanifold.spectral import QSpectrum


def within_se(x, target, k=3.0):
    """Mean of squares of zero-mean draws against ``target``, ``k`` standard errors."""
    sq = np.asarray(x) ** 2
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    return abs(sq.mean() - target) <= k * se


def test_stationary_heat_samples():
    Q = QSpectrum(np.array([1.0, 1 / 16, 0.0]))
    x = sample_stationary_heat(Q, seed=7, size=100_000)
    assert within_se(x[:, 0], 0.5)
    assert within_se(x[:, 1], 1 / 128)
    assert np.all(x[:, 2] == 0.0)
    np.testing.assert_array_equal(sample_stationary_heat(QSpectrum.zeros(4), 1), 0.0)


def test_stationary_wave_samples():
    Q = QSpectrum(np.array([1.0]))
    z, zd = sample_stationary_wave(Q, 0.01, seed=3, size=100_000)
    assert within_se(z[:, 0], 0.5)
    assert within_se(zd[:, 0], 50.0)
    with pytest.raises(ValueError):
        sample_stationary_wave(Q, 0.0, 1)


@pytest.mark.parametrize("nu", [0.1, 0.01, 1e-4])
def test_joint_covariance_solves_lyapunov(nu):
    M = 6
    P = stationary_joint_covariance(M, nu)
    for k in range(1, M + 1):
        D = np.zeros((3, 3))
        D[0, 0] = -k * k
        D[1:, 1:] = wave_generator(k, nu)[0]
        b = np.array([1.0, 0.0, 1.0 / nu])
        ref = solve_continuous_lyapunov(D, -np.outer(b, b))
        np.testing.assert_allclose(P[k - 1], ref, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("dt,nu", [(1e-3, 0.01), (0.25, 0.1), (1e-3, 1e-4)])
def test_step_gram_against_quadrature(dt, nu):
    M = 5
    fac = step_factors(M, dt, nu)
    for k in range(1, M + 1):
        D = np.zeros((4, 4))
        D[1, 1] = -k * k
        D[2:, 2:] = wave_generator(k, nu)[0]
        b = np.array([1.0, 1.0, 0.0, 1.0 / nu])
        # joint covariance of (beta(dt), int e^{D(dt-s)} b dW) over one step
        G, _ = quad_vec(lambda s: (expm(D * (dt - s)) @ b)[:, None] * (expm(D * (dt - s)) @ b)[None, :],
                        0.0, dt, epsabs=1e-15, epsrel=1e-12)
        np.testing.assert_allclose(fac.gram[k - 1], G, rtol=1e-8, atol=1e-10 * G.max())


def test_heat_and_wave_share_the_brownian_increment():
    h = step_factors(8, 1e-3)
    w = step_factors(8, 1e-3, 0.01)
    np.testing.assert_allclose(w.chol[:, :2, :2], h.chol, rtol=1e-12)
    noise = NoisePath(5, 1e-3, 8)
    Q = QSpectrum.power_law(8)
    a = evolve_ou(noise, Q, None, -10, 20)
    b = evolve_ou(noise, Q, 0.01, -10, 20)
    np.testing.assert_array_equal(a.z_heat, b.z_heat)


def test_noise_blocks_reproducible():
    n = NoisePath(11, 0.01, 3)
    B = n.block_len
    whole = n.normals(-B - 5, B + 7)
    np.testing.assert_array_equal(n.normals(-3, 4), whole[B + 2:B + 9])
    np.testing.assert_array_equal(NoisePath(11, 0.01, 3).normals(B - 1, B + 1), whole[2 * B + 4:2 * B + 6])
    assert not np.array_equal(NoisePath(12, 0.01, 3).normals(0, 3), n.normals(0, 3))


def test_deterministic_decay_with_zero_noise():
    Q = QSpectrum.zeros(3)
    init = {"heat": np.array([1.0, 0.0, 0.0])}
    p = evolve_ou(NoisePath(0, 0.01, 3), Q, None, 0, 100, init=init)
    np.testing.assert_allclose(p.z_heat[:, 0], np.exp(-p.times), rtol=1e-13)
    np.testing.assert_array_equal(p.z_heat[:, 1:], 0.0)


def test_wave_ou_deterministic_mode_matches_closed_form():
    # nu = 0.01, k = 4: roots -20 and -80; z(0) = 1, z'(0) = 0
    Q = QSpectrum.zeros(4)
    init = {"heat": np.zeros(4), "z": np.array([0, 0, 0, 1.0]), "zdot": np.zeros(4)}
    p = evolve_ou(NoisePath(0, 1e-3, 4), Q, 0.01, 0, 100, init=init)
    t = p.times
    np.testing.assert_allclose(p.z_wave[:, 3], 4 / 3 * np.exp(-20 * t) - 1 / 3 * np.exp(-80 * t), atol=1e-14)


def test_heat_autocorrelation():
    dt = 0.1
    Q = QSpectrum(np.array([1.0, 0.0]))
    p = evolve_ou(NoisePath(3, dt, 2), Q, None, 0, 100_000)
    x = p.z_heat[:, 0]
    rho = np.dot(x[1:], x[:-1]) / np.dot(x, x)
    target = math.exp(-dt)
    # Bartlett standard error for an AR(1) sample autocorrelation
    se = math.sqrt((1 - target**2) / x.size)
    assert abs(rho - target) <= 3 * se


def test_shift_group_property():
    p = build_path(1, QSpectrum.power_law(4), 0.01, -2.0, 2.0, nu=0.01)
    assert p.shift(0.0).i0 == p.i0
    back = p.shift(0.37).shift(-0.37)
    assert back.i0 == p.i0
    np.testing.assert_array_equal(back.at(0.5, "wave"), p.at(0.5, "wave"))
    np.testing.assert_array_equal(p.shift(0.37).at(0.1), p.at(0.47))
    with pytest.raises(ValueError):
        p.shift(5.0)
    with pytest.raises(ValueError):
        p.shift(0.005)


def test_law_under_random_shifts():
    # shifts spaced 10 time units apart decorrelate mode 1 to e^-10
    Q = QSpectrum(np.array([1.0]))
    p = build_path(9, Q, 1.0, 0.0, 100_000.0)
    shifts = np.random.default_rng(0).choice(10_000, size=10_000, replace=False) * 10.0
    vals = np.array([p.shift(s).at(0.0)[0] for s in shifts])
    assert within_se(vals, 0.5)


def test_stationarity_preserved_and_velocity_law():
    nu = 0.01
    Q = QSpectrum.power_law(4)
    R = 20_000
    noise = NoisePath(21, 0.05, 4, R)
    p = evolve_ou(noise, Q, nu, 0, 40)
    for i in (0, 20, 40):
        assert within_se(p.z_heat[i, :, 0], 0.5)
        assert within_se(p.z_wave[i, :, 1], 1 / 128)
        assert within_se(p.zdot_wave[i, :, 0], 1 / (2 * nu))
    e = nu**2 * np.sum(p.zdot_wave[-1] ** 2, axis=-1)
    se = e.std(ddof=1) / math.sqrt(R)
    assert abs(e.mean() - nu * Q.trace / 2) <= 3 * se


def test_stepper_matches_evolve():
    Q = QSpectrum.power_law(3)
    noise = NoisePath(4, 0.01, 3)
    p = evolve_ou(noise, Q, 0.05, 0, 5)
    st_ = {"heat": p.z_heat[0], "z": p.z_wave[0], "zdot": p.zdot_wave[0]}
    stepper = OUStepper(Q, 0.01, 0.05)
    for i in range(5):
        st_ = stepper.step(st_, noise.normals(i, i + 1)[0])
    np.testing.assert_allclose(st_["z"], p.z_wave[-1], rtol=1e-14)


def test_path_csv_columns(tmp_path):
    p = build_path(1, QSpectrum.power_law(2), 0.5, 0.0, 1.0, nu=0.01)
    out = tmp_path / "path.csv"
    p.to_csv(out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["t", "mode", "z_heat", "z_wave", "zdot_wave"]
    assert len(rows) == 1 + 3 * 2
    assert float(rows[3][0]) == 0.5 and rows[3][1] == "1"


@settings(max_examples=10, deadline=None)
@given(st.integers(-50, 50), st.integers(1, 30))
def test_window_matches_parent(lo, n):
    p = build_path(2, QSpectrum.power_law(2), 0.1, -6.0, 6.0)
    t_lo = lo * 0.1
    t_hi = min(6.0, t_lo + n * 0.1)
    w = p.window(t_lo, t_hi)
    np.testing.assert_array_equal(w.at(t_hi), p.at(t_hi))


def test_sublinear_growth():
    # linear growth would keep the decade maxima of |z|/t level; stationarity gives close to 10x
    Q = QSpectrum.power_law(4)
    p = evolve_ou(NoisePath(42, 1.0, 4, 100), Q, None, 0, 10_000)
    n = np.linalg.norm(p.z_heat, axis=-1) / np.maximum(p.times, 1.0)[:, None]
    first = n[100:1001].max(axis=0)
    second = n[1000:10_001].max(axis=0)
    assert np.median(first / second) >= 5.0
