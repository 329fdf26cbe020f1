"""Closed-form profile families a(x) with exact first and second derivatives.

Every family is identified by an integer code and a flat float64 parameter
vector so that the same description can be evaluated from compiled code
(``profile_scalar``) and from vectorized numpy (``profile_array``).
"""

from __future__ import annotations

import math

import numpy as np

from .._accel import njit

PROF_PYTHON = -1
PROF_CONST = 0  # [c]
PROF_SIN = 1  # [R]               a = R sin(x / R)
PROF_TRIG = 2  # [c, k, M, a1, b1, ..., aM, bM]   a = c + sum a_m cos(m k x + b_m)
PROF_BRIDGE = 3  # [band, eps, width, c_flat, L, x_min]

BAND_COS = 0
BAND_SQRT = 1

# exp(-1/t) is exactly zero in double precision below this argument
_STEP_FLOOR = 1e-3


@njit(cache=True)
def _bump_scalar(t):
    if t < _STEP_FLOOR:
        return 0.0, 0.0, 0.0
    e = math.exp(-1.0 / t)
    it = 1.0 / t
    return e, e * it * it, e * (1.0 - 2.0 * t) * it * it * it * it


@njit(cache=True)
def smooth_step_scalar(t):
    """exp(-1/t) smooth step on [0, 1] with its first two derivatives."""
    if t <= 0.0:
        return 0.0, 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0, 0.0
    A, A1, A2 = _bump_scalar(t)
    B, Bd, Bdd = _bump_scalar(1.0 - t)
    B1 = -Bd
    B2 = Bdd
    S = A + B
    S1 = A1 + B1
    N = A1 * B - A * B1
    N1 = A2 * B - A * B2
    return A / S, N / (S * S), N1 / (S * S) - 2.0 * N * S1 / (S * S * S)


@njit(cache=True)
def _band_scalar(kind, x):
    if kind == BAND_COS:
        return math.cos(x), -math.sin(x), -math.cos(x)
    b = math.sqrt(1.0 - x * x)
    return b, -x / b, -1.0 / (b * b * b)


@njit(cache=True)
def profile_scalar(code, params, x):
    """Evaluate (a, a', a'') of a coded profile at a single point."""
    if code == PROF_CONST:
        return params[0], 0.0, 0.0
    if code == PROF_SIN:
        R = params[0]
        return R * math.sin(x / R), math.cos(x / R), -math.sin(x / R) / R
    if code == PROF_TRIG:
        a = params[0]
        a1 = 0.0
        a2 = 0.0
        k = params[1]
        M = int(params[2])
        for m in range(1, M + 1):
            amp = params[1 + 2 * m]
            ph = params[2 + 2 * m]
            w = m * k
            arg = w * x + ph
            c = math.cos(arg)
            a += amp * c
            a1 -= amp * w * math.sin(arg)
            a2 -= amp * w * w * c
        return a, a1, a2
    # PROF_BRIDGE
    kind = int(params[0])
    eps = params[1]
    width = params[2]
    cflat = params[3]
    L = params[4]
    xmin = params[5]
    xc = (x - xmin) % L + xmin
    r = abs(xc)
    if r >= eps + width:
        return cflat, 0.0, 0.0
    B, B1, B2 = _band_scalar(kind, xc)
    if r <= eps:
        return B, B1, B2
    s, s1, s2 = smooth_step_scalar((r - eps) / width)
    sg = 1.0 if xc > 0.0 else -1.0
    sx = sg * s1 / width
    sxx = s2 / (width * width)
    a = (1.0 - s) * B + s * cflat
    a1 = (1.0 - s) * B1 + sx * (cflat - B)
    a2 = (1.0 - s) * B2 - 2.0 * sx * B1 + sxx * (cflat - B)
    return a, a1, a2


def _bump_array(t):
    live = t >= _STEP_FLOOR
    tt = np.where(live, t, 1.0)
    it = 1.0 / tt
    e = np.where(live, np.exp(-it), 0.0)
    return e, e * it**2, e * (1.0 - 2.0 * tt) * it**4


def smooth_step_array(t):
    """Vectorized ``smooth_step_scalar``."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    A, A1, A2 = _bump_array(tt)
    B, Bd, Bdd = _bump_array(1.0 - tt)
    B1 = -Bd
    S = A + B
    S1 = A1 + B1
    N = A1 * B - A * B1
    N1 = A2 * B - A * Bdd
    s = np.where(inside, A / S, np.where(t >= 1.0, 1.0, 0.0))
    s1 = np.where(inside, N / S**2, 0.0)
    s2 = np.where(inside, N1 / S**2 - 2.0 * N * S1 / S**3, 0.0)
    return s, s1, s2


def _band_array(kind, x):
    if kind == BAND_COS:
        return np.cos(x), -np.sin(x), -np.cos(x)
    b = np.sqrt(np.maximum(1.0 - x * x, 1e-300))
    return b, -x / b, -1.0 / b**3


def profile_array(code, params, x):
    """Evaluate (a, a', a'') of a coded profile on an array of points."""
    x = np.asarray(x, dtype=float)
    if code == PROF_CONST:
        return np.full_like(x, params[0]), np.zeros_like(x), np.zeros_like(x)
    if code == PROF_SIN:
        R = params[0]
        return R * np.sin(x / R), np.cos(x / R), -np.sin(x / R) / R
    if code == PROF_TRIG:
        a = np.full_like(x, params[0])
        a1 = np.zeros_like(x)
        a2 = np.zeros_like(x)
        k = params[1]
        for m in range(1, int(params[2]) + 1):
            amp, ph = params[1 + 2 * m], params[2 + 2 * m]
            w = m * k
            arg = w * x + ph
            c = np.cos(arg)
            a = a + amp * c
            a1 = a1 - amp * w * np.sin(arg)
            a2 = a2 - amp * w * w * c
        return a, a1, a2
    if code != PROF_BRIDGE:
        raise ValueError(f"unknown profile code {code}")
    kind, eps, width, cflat, L, xmin = params[:6]
    xc = np.mod(x - xmin, L) + xmin
    r = np.abs(xc)
    # band formula is only evaluated where it is defined
    xb = np.where(r < eps + width, xc, 0.0)
    B, B1, B2 = _band_array(int(kind), xb)
    s, s1, s2 = smooth_step_array((r - eps) / width)
    sx = np.sign(xc) * s1 / width
    sxx = s2 / width**2
    a = (1.0 - s) * B + s * cflat
    a1 = (1.0 - s) * B1 + sx * (cflat - B)
    a2 = (1.0 - s) * B2 - 2.0 * sx * B1 + sxx * (cflat - B)
    flat = r >= eps + width
    return (
        np.where(flat, cflat, a),
        np.where(flat, 0.0, a1),
        np.where(flat, 0.0, a2),
    )
