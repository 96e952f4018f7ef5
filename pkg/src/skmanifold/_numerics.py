"""Small dense-linear-algebra kernels shared by the solvers."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter

_TAYLOR_RADIUS = 0.2
_TAYLOR_TERMS = 18


def phi_functions(x):
    """Return ``(exp(x), phi1(x), phi2(x))`` elementwise for real or complex ``x``.

    ``phi1(x) = (e^x - 1)/x`` and ``phi2(x) = (e^x - 1 - x)/x^2``, with a
    Taylor branch near zero.
    """
    x = np.asarray(x)
    e0 = np.exp(x)
    small = np.abs(x) < _TAYLOR_RADIUS
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        p1 = np.where(small, 0.0, np.expm1(xs) / xs)
        p2 = np.where(small, 0.0, (np.expm1(xs) - xs) / (xs * xs))
    if np.any(small):
        xt = np.where(small, x, 0.0)
        t1 = np.zeros_like(xt)
        t2 = np.zeros_like(xt)
        term = np.ones_like(xt)
        for n in range(_TAYLOR_TERMS):
            # term = x^n
            t1 = t1 + term / math.factorial(n + 1)
            t2 = t2 + term / math.factorial(n + 2)
            term = term * xt
        p1 = np.where(small, t1, p1)
        p2 = np.where(small, t2, p2)
    return e0, p1, p2


def exp_weights(X, H):
    """Propagator and linear-interpolation quadrature weights for ``y' = X y + g(t)``.

    Over a step of signed length ``H``::

        y(H) = Phi y(0) + (W1 - W2) g(0) + W2 g(H)

    is exact when ``g`` is linear on the step.  ``X`` has shape ``(..., n, n)``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    flat = X.reshape(-1, n, n)
    Phi = np.empty_like(flat)
    W1 = np.empty_like(flat)
    W2 = np.empty_like(flat)
    eye = np.eye(n)
    for i, Xi in enumerate(flat):
        big = np.zeros((3 * n, 3 * n))
        big[:n, :n] = Xi * H
        big[:n, n:2 * n] = eye
        big[n:2 * n, 2 * n:] = eye
        E = expm(big)
        Phi[i] = E[:n, :n]
        W1[i] = H * E[:n, n:2 * n]
        W2[i] = H * E[:n, 2 * n:]
    shape = X.shape
    return Phi.reshape(shape), W1.reshape(shape), W2.reshape(shape)


def expm_2x2(X):
    """Closed-form exponential of real 2x2 matrices, stacked on leading axes.

    Uses ``e^X = e^{m2} [I + phi1(m1 - m2) (X - m2 I)]`` with ``m2`` the
    eigenvalue of larger real part, which stays accurate through the
    repeated-eigenvalue (critically damped) case.
    """
    X = np.asarray(X, dtype=float)
    tr = X[..., 0, 0] + X[..., 1, 1]
    det = X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0]
    disc = np.sqrt((tr * tr / 4.0 - det).astype(complex))
    # larger-magnitude root first, the other via the product det to avoid cancellation
    sgn = np.where(tr >= 0, 1.0, -1.0)
    big = tr / 2.0 + sgn * disc
    safe = np.where(big == 0, 1.0, big)
    small = np.where(big == 0, 0.0, det / safe)
    real_pair = np.abs(disc.imag) == 0
    r1 = np.where(real_pair, big, tr / 2.0 - disc)
    r2 = np.where(real_pair, small, tr / 2.0 + disc)
    m2 = np.where(r2.real >= r1.real, r2, r1)
    m1 = np.where(r2.real >= r1.real, r1, r2)
    _, p1, _ = phi_functions(m1 - m2)
    scale = np.exp(m2)
    eye = np.broadcast_to(np.eye(2), X.shape)
    shifted = X - m2[..., None, None] * eye
    out = scale[..., None, None] * (eye + p1[..., None, None] * shifted)
    return out.real


def affine_recurrence(phi, w, y0):
    """Solve ``y[n+1] = phi * y[n] + w[n]`` per column.

    ``phi`` and ``y0`` have shape ``(m,)``, ``w`` has shape ``(L, m)``; the
    result has shape ``(L + 1, m)``.  Complex inputs are allowed.
    """
    w = np.asarray(w)
    dtype = np.result_type(w, phi, y0, float)
    L, m = w.shape
    out = np.empty((L + 1, m), dtype=dtype)
    x = np.empty(L + 1, dtype=dtype)
    for j in range(m):
        x[0] = y0[j]
        x[1:] = w[:, j]
        out[:, j] = lfilter([1.0], [1.0, -phi[j]], x)
    return out


def affine_recurrence_2x2(Phi, w, y0):
    """Solve ``y[n+1] = Phi @ y[n] + w[n]`` for 2-vectors, one system per column.

    ``Phi`` has shape ``(m, 2, 2)``, ``w`` shape ``(L, m, 2)``, ``y0`` shape
    ``(m, 2)``.  Each component obeys the scalar second-order recurrence given
    by Cayley-Hamilton, which runs through ``lfilter``.
    """
    L, m, _ = w.shape
    out = np.empty((L + 1, m, 2))
    out[0] = y0
    if L == 0:
        return out
    for j in range(m):
        P = Phi[j]
        tr = P[0, 0] + P[1, 1]
        det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
        wj = w[:, j, :]
        y1 = P @ y0[j] + wj[0]
        # y[n+2] - tr y[n+1] + det y[n] = w[n+1] + (P - tr I) w[n]
        r = wj[1:] + wj[:-1] @ (P - tr * np.eye(2)).T
        x = np.empty((L + 1, 2))
        x[0] = y0[j]
        x[1] = y1 - tr * y0[j]
        x[2:] = r
        out[:, j, :] = lfilter([1.0], [1.0, -tr, det], x, axis=0)
    return out


def psd_cholesky(G):
    """Lower Cholesky factor of stacked PSD matrices, clipping rounding-level negative pivots."""
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    L = np.zeros_like(G)
    for j in range(n):
        d = G[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        d = np.maximum(d, 0.0)
        ljj = np.sqrt(d)
        L[..., j, j] = ljj
        safe = np.where(ljj > 0, ljj, 1.0)
        for i in range(j + 1, n):
            s = G[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            L[..., i, j] = np.where(ljj > 0, s / safe, 0.0)
    return L
