"""Matrix exponential and the closed-form solutions for a frozen geospin matrix."""

from __future__ import annotations

import math

import numpy as np

from .errors import ExpmOverflow, SeriesNotConverged

SERIES_TOL = 1e-15
SERIES_MAX_TERMS = 500


def _norm1(a: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(a), axis=0))) if a.size else 0.0


def expm(m) -> np.ndarray:
    """exp(M) by scaling and squaring with a Taylor series on M / 2^s, ||M / 2^s||_1 <= 1/2."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("expm needs finite entries")
    n = m.shape[0]
    norm = _norm1(m)
    s = 0
    if norm > 0.5:
        s = max(0, math.frexp(norm / 0.5)[1])
    a = m / 2.0 ** s
    total = np.eye(n)
    term = np.eye(n)
    eps = np.finfo(float).eps
    for k in range(1, 40):
        term = term @ a / k
        total = total + term
        if _norm1(term) <= eps * _norm1(total):
            break
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            total = total @ total
    if not np.all(np.isfinite(total)):
        raise ExpmOverflow(f"matrix exponential overflowed (||M||_1 = {norm:.3g})")
    return total


def constant_w_velocity(w0, v0, t: float) -> np.ndarray:
    """v(t) = expm(-W0 t) v0, the solution of dv/dt = -W0 v with v0 a column vector."""
    w0 = np.asarray(w0, dtype=float)
    return expm(-w0 * t) @ np.asarray(v0, dtype=float)


def position_correction(w0, v0, t: float) -> np.ndarray:
    """u_hat = sum_{m>=1} (-W0)^m t^(m+1)/(m+1)! v0, which vanishes identically when W0 = 0."""
    w0 = np.asarray(w0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    step = -w0 * t
    scale = _norm1(step)
    total = np.zeros_like(v0)
    term = v0 * t
    small = 0
    for m in range(1, SERIES_MAX_TERMS + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            term = step @ term / (m + 1)
            total = total + term
        if not np.all(np.isfinite(total)):
            raise SeriesNotConverged(f"position series overflowed at term {m} (||W0 t||_1 = {scale:.3g})")
        if float(np.max(np.abs(term), initial=0.0)) < SERIES_TOL * max(1.0, float(np.max(np.abs(total), initial=0.0))):
            small += 1
            if small >= 2 and m > scale:
                return total
        else:
            small = 0
    raise SeriesNotConverged(f"position series did not converge in {SERIES_MAX_TERMS} terms "
                             f"(||W0 t||_1 = {scale:.3g})")


def constant_w_position(w0, v0, u0, t: float) -> np.ndarray:
    """u(t) = u0 + v0 t + u_hat, i.e. u0 + integral_0^t expm(-W0 s) v0 ds without inverting W0."""
    v0 = np.asarray(v0, dtype=float)
    return np.asarray(u0, dtype=float) + v0 * t + position_correction(w0, v0, t)
