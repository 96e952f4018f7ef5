"""Pathwise integrators for the nonlinear stochastic heat and damped wave equations.

Both consume the per-step normals of a :class:`~skmanifold.ou.NoisePath`
through the same lower Cholesky factor, so a coupled run drives the two
systems with identical Brownian increments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._numerics import exp_weights
from .ou import NoisePath, correlated_increments, step_factors, wave_generator
from .spectral import Nonlinearity, QSpectrum, apply_nonlinearity, wavenumbers

BLOWUP_LIMIT = 1e8


class BlowUpError(FloatingPointError):
    """A mode left the finite range or exceeded the blow-up limit."""


def _check(x, what: str) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > BLOWUP_LIMIT:
        raise BlowUpError(f"{what} blew up")


@lru_cache(maxsize=64)
def _wave_weights(M: int, dt: float, nu: float):
    B = wave_generator(wavenumbers(M), nu)
    _, W1, W2 = exp_weights(B, dt)
    # the forcing enters as (0, g / nu): keep only the second column
    return (W1 - W2)[:, :, 1] / nu, W2[:, :, 1] / nu, W1[:, :, 1] / nu


def step_heat(u, normals, dt: float, f: Nonlinearity, Q: QSpectrum, M_phys: int | None = None,
              check: bool = True) -> np.ndarray:
    """One exponential-Euler step with the exact heat OU increment.

    ``u_k' = e^{-k^2 dt} u_k + dt phi1(-k^2 dt) f_k(u) + sigma sqrt(q_k) eta_k``.
    """
    u = np.asarray(u, dtype=float)
    fac = step_factors(Q.M, float(dt))
    inc = correlated_increments(fac, normals, Q.amplitudes)
    g = apply_nonlinearity(u, 0.0, f, M_phys or 4 * Q.M)
    out = fac.decay_heat * u + dt * fac.phi1_heat * g + inc[..., 1]
    if check:
        _check(out, "heat state")
    return out


def step_wave(u, ut, normals, dt: float, nu: float, f: Nonlinearity, Q: QSpectrum,
              M_phys: int | None = None, check: bool = True):
    """One step for ``nu u'' + u' = A u + f(u) + sigma W'`` in the variables ``(u, u_t)``.

    Exact linear propagator and exact Gaussian increment; the nonlinear term
    uses an explicit exponential Heun predictor-corrector.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    u = np.asarray(u, dtype=float)
    ut = np.asarray(ut, dtype=float)
    M_phys = M_phys or 4 * Q.M
    fac = step_factors(Q.M, float(dt), float(nu))
    wa, wb, w1 = _wave_weights(Q.M, float(dt), float(nu))
    inc = correlated_increments(fac, normals, Q.amplitudes)[..., 2:]
    y = np.stack([u, ut], axis=-1)
    lin = np.einsum("mij,...mj->...mi", fac.phi_wave, y) + inc
    g0 = apply_nonlinearity(u, 0.0, f, M_phys)
    pred = lin + w1 * g0[..., None]
    g1 = apply_nonlinearity(pred[..., 0], 0.0, f, M_phys)
    out = lin + wa * g0[..., None] + wb * g1[..., None]
    if check:
        _check(out, "wave state")
    return out[..., 0], out[..., 1]


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    u: np.ndarray | None
    v: np.ndarray | None
    norms: np.ndarray
    seed: int
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CoupledParams:
    nu: float
    f: Nonlinearity
    Q: QSpectrum
    dt: float = 1e-3
    M_phys: int | None = None


def run_coupled(u0, u1, params: CoupledParams, noise: NoisePath, T: float, store_fields: bool = True):
    """Integrate the wave and heat systems on ``[0, T]`` with shared noise.

    Returns ``(wave_record, heat_record, stats)`` where ``stats`` holds the
    per-replica ``sup_t |u^nu(t) - u(t)|`` and a blow-up mask.  With
    replicas, a replica that blows up is frozen at NaN and flagged instead
    of aborting the batch; a single trajectory raises :class:`BlowUpError`.
    """
    if abs(noise.dt - params.dt) > 1e-15 or noise.M != params.Q.M:
        raise ValueError("noise path does not match the parameters")
    n_steps = int(round(T / params.dt))
    if abs(n_steps * params.dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt")
    batch = noise._shape[:-1]
    uw = np.broadcast_to(np.asarray(u0, dtype=float), batch).copy()
    vw = np.broadcast_to(np.asarray(u1, dtype=float), batch).copy()
    uh = uw.copy()
    lead = batch[:-1]
    blown = np.zeros(lead, dtype=bool)
    sup = np.linalg.norm(uw - uh, axis=-1)
    rec_n = (n_steps + 1,) + lead
    nw, nh = np.empty(rec_n), np.empty(rec_n)
    nw[0] = np.linalg.norm(uw, axis=-1)
    nh[0] = np.linalg.norm(uh, axis=-1)
    fields = None
    if store_fields:
        fields = {k: np.empty((n_steps + 1,) + batch) for k in ("uw", "vw", "uh")}
        fields["uw"][0], fields["vw"][0], fields["uh"][0] = uw, vw, uh
    single = not lead
    Bk = noise.block_len
    i = 0
    while i < n_steps:
        j = min(n_steps, i + Bk)
        nrm = noise.normals(i, j)
        for s in range(j - i):
            uw, vw = step_wave(uw, vw, nrm[s], params.dt, params.nu, params.f, params.Q, params.M_phys, check=single)
            uh = step_heat(uh, nrm[s], params.dt, params.f, params.Q, params.M_phys, check=single)
            if not single:
                bad = ~(np.all(np.isfinite(uw) & np.isfinite(vw) & np.isfinite(uh), axis=-1)
                        & (np.max(np.abs(np.concatenate([uw, vw, uh], axis=-1)), axis=-1) <= BLOWUP_LIMIT))
                if np.any(bad & ~blown):
                    blown |= bad
                    uw[blown] = vw[blown] = uh[blown] = np.nan
            k = i + s + 1
            d = np.linalg.norm(uw - uh, axis=-1)
            sup = np.fmax(sup, d)
            nw[k] = np.linalg.norm(uw, axis=-1)
            nh[k] = np.linalg.norm(uh, axis=-1)
            if fields is not None:
                fields["uw"][k], fields["vw"][k], fields["uh"][k] = uw, vw, uh
        i = j
    if not single:
        sup = np.where(blown, np.nan, sup)
    times = np.arange(n_steps + 1) * params.dt
    meta = {"nu": params.nu, "sigma": params.Q.sigma, "q": params.Q.q.tolist(), "f": params.f.kind,
            "a": params.f.a, "M": params.Q.M, "dt": params.dt}
    wave = TrajectoryRecord(times, None if fields is None else fields["uw"], None if fields is None else fields["vw"],
                            nw, noise.seed, meta)
    heat = TrajectoryRecord(times, None if fields is None else fields["uh"], None, nh, noise.seed,
                            {**meta, "nu": None})
    return wave, heat, {"sup_diff": sup, "blown": blown}
