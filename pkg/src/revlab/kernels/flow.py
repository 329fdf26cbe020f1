"""Geodesic-flow kernels: Dormand-Prince 5(4) on the homogeneous Hamiltonian.

State is (x, theta, xi_x, xi_theta) with p = sqrt(xi_x^2 + xi_theta^2 / a^2).
The right-hand side and the single RK step are written once, using only
arithmetic that works on floats and on numpy arrays alike, and then
instantiated twice: compiled by numba around a scalar per-lane driver, and as
plain numpy around a lane-vectorized driver.  ``REVLAB_BACKEND`` selects.

Loop detection tracks local minima of the squared distance to the base point
measured in the base point's metric, d^2 = dx^2 + a(x0)^2 dtheta^2 (wrapped).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .. import _accel
from . import profiles as _prof

STATUS_RUNNING = 0
STATUS_DONE = 1
STATUS_LOOP = 2
STATUS_UNDERFLOW = 3

H_MAX = 0.2
H_INIT = 0.01
H_FLOOR = 1e-13
BISECT_ITERS = 60
# Hamiltonian change allowed per step: 0.1 * tol per unit time, never below round-off
P_ROUNDOFF = 1e-13

# Dormand-Prince 5(4)
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


def _build(profile, wrap):
    """Instantiate rhs/step/distance helpers around ``profile(code, params, x)``."""

    @wrap
    def rhs(code, params, x, px, pt):
        a, a1, _ = profile(code, params, x)
        aa = a * a
        p = np.sqrt(px * px + pt * pt / aa)
        return px / p, pt / (aa * p), pt * pt * a1 / (aa * a * p), a

    @wrap
    def hamiltonian(code, params, x, px, pt):
        a, _, _ = profile(code, params, x)
        return np.sqrt(px * px + pt * pt / (a * a))

    @wrap
    def step(code, params, x, th, px, pt, h):
        k1x, k1t, k1p, a1 = rhs(code, params, x, px, pt)
        k2x, k2t, k2p, a2 = rhs(code, params, x + h * A21 * k1x, px + h * A21 * k1p, pt)
        k3x, k3t, k3p, a3 = rhs(
            code, params, x + h * (A31 * k1x + A32 * k2x), px + h * (A31 * k1p + A32 * k2p), pt
        )
        k4x, k4t, k4p, a4 = rhs(
            code,
            params,
            x + h * (A41 * k1x + A42 * k2x + A43 * k3x),
            px + h * (A41 * k1p + A42 * k2p + A43 * k3p),
            pt,
        )
        k5x, k5t, k5p, a5 = rhs(
            code,
            params,
            x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x),
            px + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p),
            pt,
        )
        k6x, k6t, k6p, a6 = rhs(
            code,
            params,
            x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x),
            px + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p),
            pt,
        )
        xn = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        tn = th + h * (B1 * k1t + B3 * k3t + B4 * k4t + B5 * k5t + B6 * k6t)
        pn = px + h * (B1 * k1p + B3 * k3p + B4 * k4p + B5 * k5p + B6 * k6p)
        k7x, k7t, k7p, a7 = rhs(code, params, xn, pn, pt)
        ex = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
        et = h * (E1 * k1t + E3 * k3t + E4 * k4t + E5 * k5t + E6 * k6t + E7 * k7t)
        ep = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        err = np.maximum(np.maximum(np.abs(ex), np.abs(et)), np.abs(ep))
        amin = np.minimum(np.minimum(np.minimum(a1, a2), np.minimum(a3, a4)),
                          np.minimum(np.minimum(a5, a6), a7))
        return xn, tn, pn, err, amin

    @wrap
    def dist_rate(code, params, torus, L, x0, th0, a0, x, th, px, pt):
        """Squared base-metric distance to (x0, th0), its time derivative and speed."""
        dx = x - x0
        if torus:
            dx = (dx + 0.5 * L) % L - 0.5 * L
        dth = (th - th0 + math.pi) % (2.0 * math.pi) - math.pi
        vx, vt, _, _ = rhs(code, params, x, px, pt)
        d2 = dx * dx + a0 * a0 * dth * dth
        rate = 2.0 * (dx * vx + a0 * a0 * dth * vt)
        speed = np.sqrt(vx * vx + a0 * a0 * vt * vt)
        return d2, rate, speed

    return rhs, hamiltonian, step, dist_rate


def _identity(f):
    return f


# ---------------------------------------------------------------------------
# numba backend: scalar driver per lane


@lru_cache(maxsize=None)
def _numba_kernels():
    njit = _accel.njit
    rhs, hamiltonian, step, dist_rate = _build(_prof.profile_scalar, njit)

    @njit
    def integrate(code, params, torus, L, x, th, px, pt, t_end, tol, h,
                  detect, x0, th0, a0, loop_tol):
        """Advance one lane to t_end, stopping early at the first loop if detect."""
        t = 0.0
        p_prev = hamiltonian(code, params, x, px, pt)
        d2p, ratep, speedp = dist_rate(code, params, torus, L, x0, th0, a0, x, th, px, pt)
        while t < t_end:
            hh = min(h, t_end - t)
            xn, tn, pn, err, amin = step(code, params, x, th, px, pt, hh)
            ok = math.isfinite(err) and err <= tol and (torus or amin > 0.0)
            if ok:
                p_new = hamiltonian(code, params, xn, pn, pt)
                if abs(p_new - p_prev) > max(0.1 * tol * hh, P_ROUNDOFF):
                    ok = False
            if not ok:
                if math.isfinite(err) and err > tol:
                    h = hh * max(0.2, 0.9 * (tol / err) ** 0.2)
                else:
                    h = 0.5 * hh
                if h < H_FLOOR * max(1.0, t):
                    return STATUS_UNDERFLOW, t, x, th, px, pt, h
                continue
            if detect:
                d2n, raten, speedn = dist_rate(code, params, torus, L, x0, th0, a0,
                                               xn, tn, pn, pt)
                if ratep < 0.0 and raten >= 0.0:
                    reach = math.sqrt(min(d2p, d2n)) - hh * (2.0 * max(speedp, speedn) + 0.1)
                    if reach <= loop_tol:
                        lo = 0.0
                        hi = hh
                        for _ in range(BISECT_ITERS):
                            mid = 0.5 * (lo + hi)
                            xm, tm, pm, _, _ = step(code, params, x, th, px, pt, mid)
                            _, rm, _ = dist_rate(code, params, torus, L, x0, th0, a0,
                                                 xm, tm, pm, pt)
                            if rm < 0.0:
                                lo = mid
                            else:
                                hi = mid
                            if hi - lo <= 1e-15 * max(1.0, t):
                                break
                        xm, tm, pm, _, _ = step(code, params, x, th, px, pt, hi)
                        dm, _, _ = dist_rate(code, params, torus, L, x0, th0, a0,
                                             xm, tm, pm, pt)
                        if dm < loop_tol * loop_tol:
                            return STATUS_LOOP, t + hi, xm, tm, pm, pt, h
                d2p, ratep, speedp = d2n, raten, speedn
            t += hh
            x, th, px = xn, tn, pn
            p_prev = hamiltonian(code, params, x, px, pt)
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * (tol / err) ** 0.2)
            grown = hh * fac
            if hh < h:
                grown = max(grown, h)
            h = min(H_MAX, grown)
        return STATUS_DONE, t, x, th, px, pt, h

    @njit
    def scan(code, params, torus, L, xs, ths, pxs, pts, t_ends, tol, detect,
             x0, th0, a0, loop_tol):
        m = xs.shape[0]
        status = np.zeros(m, dtype=np.int64)
        out = np.empty((m, 5))
        for i in range(m):
            st, t, x, th, px, pt, _ = integrate(code, params, torus, L, xs[i], ths[i],
                                                pxs[i], pts[i], t_ends[i], tol, H_INIT,
                                                detect, x0, th0, a0, loop_tol)
            status[i] = st
            out[i, 0] = t
            out[i, 1] = x
            out[i, 2] = th
            out[i, 3] = px
            out[i, 4] = pt
        return status, out

    return scan


# ---------------------------------------------------------------------------
# numpy backend: all lanes advance together with per-lane step sizes


def _numpy_kernels(profile):
    return _build(profile, _identity)


def _scan_numpy(profile, code, params, torus, L, xs, ths, pxs, pts, t_ends, tol,
                detect, x0, th0, a0, loop_tol):
    _, hamiltonian, step, dist_rate = _numpy_kernels(profile)
    m = xs.shape[0]
    X, TH, PX, PT = (np.array(v, dtype=float) for v in (xs, ths, pxs, pts))
    T_end = np.asarray(t_ends, dtype=float)
    t = np.zeros(m)
    h = np.full(m, H_INIT)
    status = np.zeros(m, dtype=np.int64)
    out = np.empty((m, 5))
    p_prev = hamiltonian(code, params, X, PX, PT)
    d2p, ratep, speedp = dist_rate(code, params, torus, L, x0, th0, a0, X, TH, PX, PT)

    done = T_end <= 0.0
    status[done] = STATUS_DONE
    while True:
        live = np.flatnonzero(status == STATUS_RUNNING)
        if live.size == 0:
            break
        hh = np.minimum(h[live], T_end[live] - t[live])
        x, th, px, pt = X[live], TH[live], PX[live], PT[live]
        xn, tn, pn, err, amin = step(code, params, x, th, px, pt, hh)
        finite = np.isfinite(err)
        ok = finite & (err <= tol)
        if not torus:
            ok &= amin > 0.0
        with np.errstate(invalid="ignore"):
            p_new = hamiltonian(code, params, xn, pn, pt)
            ok &= np.abs(p_new - p_prev[live]) <= np.maximum(0.1 * tol * hh, P_ROUNDOFF)

        rej = ~ok
        if rej.any():
            ri = live[rej]
            with np.errstate(divide="ignore", invalid="ignore"):
                shrink = np.where(
                    finite[rej] & (err[rej] > tol),
                    np.maximum(0.2, 0.9 * (tol / err[rej]) ** 0.2),
                    0.5,
                )
            h[ri] = hh[rej] * shrink
            under = h[ri] < H_FLOOR * np.maximum(1.0, t[ri])
            if under.any():
                ui = ri[under]
                status[ui] = STATUS_UNDERFLOW
                out[ui] = np.column_stack([t[ui], X[ui], TH[ui], PX[ui], PT[ui]])

        acc = np.flatnonzero(ok)
        if acc.size == 0:
            continue
        li = live[acc]
        found = np.zeros(acc.size, dtype=bool)
        if detect:
            d2n, raten, speedn = dist_rate(code, params, torus, L, x0, th0, a0,
                                           xn[acc], tn[acc], pn[acc], pt[acc])
            cand = (ratep[li] < 0.0) & (raten >= 0.0)
            reach = np.sqrt(np.minimum(d2p[li], d2n)) - hh[acc] * (
                2.0 * np.maximum(speedp[li], speedn) + 0.1)
            cand &= reach <= loop_tol
            ci = np.flatnonzero(cand)
            if ci.size:
                ai = acc[ci]
                bx, bth, bpx, bpt = x[ai], th[ai], px[ai], pt[ai]
                lo = np.zeros(ci.size)
                hi = hh[ai].copy()
                for _ in range(BISECT_ITERS):
                    mid = 0.5 * (lo + hi)
                    xm, tm, pm, _, _ = step(code, params, bx, bth, bpx, bpt, mid)
                    _, rm, _ = dist_rate(code, params, torus, L, x0, th0, a0, xm, tm, pm, bpt)
                    neg = rm < 0.0
                    lo = np.where(neg, mid, lo)
                    hi = np.where(neg, hi, mid)
                    if np.all(hi - lo <= 1e-15 * np.maximum(1.0, t[li[ci]])):
                        break
                xm, tm, pm, _, _ = step(code, params, bx, bth, bpx, bpt, hi)
                dm, _, _ = dist_rate(code, params, torus, L, x0, th0, a0, xm, tm, pm, bpt)
                hit = dm < loop_tol * loop_tol
                if hit.any():
                    hi_lanes = li[ci[hit]]
                    status[hi_lanes] = STATUS_LOOP
                    out[hi_lanes] = np.column_stack(
                        [t[hi_lanes] + hi[hit], xm[hit], tm[hit], pm[hit], bpt[hit]])
                    found[ci[hit]] = True
            d2p[li] = d2n
            ratep[li] = raten
            speedp[li] = speedn

        keep = ~found
        ki, ka = li[keep], acc[keep]
        t[ki] += hh[ka]
        X[ki], TH[ki], PX[ki] = xn[ka], tn[ka], pn[ka]
        p_prev[ki] = hamiltonian(code, params, X[ki], PX[ki], PT[ki])
        e = err[ka]
        fac = np.where(e == 0.0, 5.0,
                       np.minimum(5.0, 0.9 * (tol / np.where(e == 0.0, 1.0, e)) ** 0.2))
        grown = hh[ka] * fac
        clipped = hh[ka] < h[ki]
        h[ki] = np.minimum(H_MAX, np.where(clipped, np.maximum(grown, h[ki]), grown))
        fin = t[ki] >= T_end[ki]
        if fin.any():
            fi = ki[fin]
            status[fi] = STATUS_DONE
            out[fi] = np.column_stack([t[fi], X[fi], TH[fi], PX[fi], PT[fi]])
    return status, out


def scan_lanes(metric, xs, ths, pxs, pts, t_ends, tol, detect=False,
               base=(0.0, 0.0), loop_tol=1e-4, backend=None):
    """Integrate many independent lanes; returns ``(status, out)``.

    ``out[i] = (t, x, theta, xi_x, xi_theta)`` at the lane's stopping time: the
    loop time for ``STATUS_LOOP`` lanes, ``t_end`` for ``STATUS_DONE`` lanes.
    """
    backend = backend or _accel.backend()
    xs, ths, pxs, pts = (np.ascontiguousarray(np.atleast_1d(v), dtype=np.float64)
                         for v in (xs, ths, pxs, pts))
    t_ends = np.ascontiguousarray(np.broadcast_to(np.asarray(t_ends, dtype=float), xs.shape))
    x0, th0 = float(base[0]), float(base[1])
    a0 = float(metric.a(np.array([x0]))[0]) if detect else 1.0
    torus = bool(metric.is_torus)
    L = float(metric.base_length)
    code = int(metric.code)
    params = metric.params_array if metric.is_coded else np.zeros(1)
    if backend == "numba" and metric.is_coded:
        scan = _numba_kernels()
        return scan(code, params, torus, L, xs, ths, pxs, pts, t_ends, float(tol),
                    bool(detect), x0, th0, a0, float(loop_tol))
    if metric.is_coded:
        profile = _prof.profile_array
    else:
        def profile(code, params, x, _fn=metric.profile):
            return _fn(x)
    return _scan_numpy(profile, code, params, torus, L, xs, ths, pxs, pts, t_ends,
                       float(tol), bool(detect), x0, th0, a0, float(loop_tol))
