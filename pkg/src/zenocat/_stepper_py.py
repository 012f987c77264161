"""Pure-Python Dormand-Prince 5(4) stepper over sparse Liouvillian terms.

This is the fallback twin of the compiled kernel in ``_stepper.pyx``: same
tableau, same PI controller constants, same cubic-Hermite dense output, so
the two backends are interchangeable up to floating-point noise.  All heavy
lifting is numpy/scipy vector arithmetic; the compiled kernel exists because
the per-step Python overhead dominates for small systems.
"""

from __future__ import annotations

import numpy as np

from .errors import StiffnessError

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# PI step controller (classic DOPRI5 choices)
BETA = 0.04
EXPO = 0.2 - 0.75 * BETA
SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
HMIN_REL = 1e-14


def _coeff_value(coeff, t: float) -> float:
    return float(coeff(t))


def _make_rhs(static, term_coeffs, term_mats):
    if not term_mats:
        if static is None:
            raise ValueError("model has neither static nor time-dependent terms")
        return lambda t, y: static.dot(y)

    def rhs(t, y):
        f = static.dot(y) if static is not None else np.zeros_like(y)
        for coeff, mat in zip(term_coeffs, term_mats):
            f += _coeff_value(coeff, t) * mat.dot(y)
        return f

    return rhs


def _error_norm(err_vec, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, rtol, atol, max_step):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((np.abs(y0) / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((np.abs(f0) / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = float(np.sqrt(np.mean((np.abs(f1 - f0) / scale) ** 2))) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return min(100 * h0, h1, max_step)


def _hermite(theta, h, y0, y1, f0, f1):
    return (1 - theta) * y0 + theta * y1 + theta * (theta - 1) * (
        (1 - 2 * theta) * (y1 - y0) + (theta - 1) * h * f0 + theta * h * f1
    )


def solve(dim, static, term_coeffs, term_mats, breakpoints, y0, t_grid,
          rtol, atol, max_step, obs_rows, store_states):
    """Integrate dy/dt = L(t) y over t_grid, sampling observables densely.

    Returns (expectations (n_obs, n_t), states (n_t, D) or None, stats).
    """
    rhs = _make_rhs(static, term_coeffs, term_mats)
    y = np.array(y0, dtype=np.complex128)
    n_t = len(t_grid)
    n_obs = obs_rows.shape[0]
    exps = np.empty((n_obs, n_t), dtype=np.complex128)
    states = np.empty((n_t, y.size), dtype=np.complex128) if store_states else None

    t = float(t_grid[0])
    t_end = float(t_grid[-1])
    nfev = naccept = nreject = 0

    ptr = 0
    if t_grid[0] == t:
        exps[:, 0] = obs_rows @ y
        if store_states:
            states[0] = y
        ptr = 1
    if ptr >= n_t:
        return exps, states, {"nfev": nfev, "naccepted": 0, "nrejected": 0}

    # breakpoints strictly inside the span force step boundaries there
    bps = [b for b in np.asarray(breakpoints, dtype=float) if t < b < t_end]
    ib = 0

    f = rhs(t, y)
    nfev += 1
    h = _initial_step(rhs, t, y, f, rtol, atol, min(max_step, t_end - t))
    nfev += 1
    errold = 1e-4
    just_rejected = False

    while t < t_end:
        h = min(h, max_step, t_end - t)
        while ib < len(bps) and bps[ib] <= t + HMIN_REL * max(abs(t), 1.0):
            ib += 1
        if ib < len(bps) and t + h > bps[ib]:
            h = bps[ib] - t
        if h < HMIN_REL * max(abs(t), 1.0):
            raise StiffnessError(
                f"step size underflow at t = {t:.6g} us (h = {h:.3g}); the model "
                "is too stiff for explicit stepping at these tolerances"
            )

        k1 = f
        k2 = rhs(t + C2 * h, y + h * (A21 * k1))
        k3 = rhs(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = rhs(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = rhs(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = rhs(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = rhs(t + h, y_new)
        nfev += 6

        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err = _error_norm(err_vec, y, y_new, rtol, atol)

        if err <= 1.0:
            t_new = t + h
            while ptr < n_t and t_grid[ptr] <= t_new:
                tg = t_grid[ptr]
                if tg == t_new:
                    yi = y_new
                else:
                    yi = _hermite((tg - t) / h, h, y, y_new, k1, k7)
                exps[:, ptr] = obs_rows @ yi
                if store_states:
                    states[ptr] = yi
                ptr += 1
            fac = SAFETY * err ** -EXPO * errold ** BETA if err > 0 else FAC_MAX
            fac = min(1.0 if just_rejected else FAC_MAX, max(FAC_MIN, fac))
            errold = max(err, 1e-4)
            t, y, f = t_new, y_new, k7
            h *= fac
            naccept += 1
            just_rejected = False
        else:
            h *= min(1.0, max(0.1, SAFETY * err ** -0.2))
            nreject += 1
            just_rejected = True

    return exps, states, {"nfev": nfev, "naccepted": naccept, "nrejected": nreject}
