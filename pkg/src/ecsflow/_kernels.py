"""Compiled per-step kernels for the flow loop.

These mirror ``curve.geometry`` (same stencils, same ghost-node rules) but
work on raw node arrays and fuse the work needed per time step.  The numpy
implementation in ``curve`` is the reference; tests check agreement.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# indices into the scalar vector returned by ``monitor_scalars``
S_MAXA, S_MAXK, S_PHI, S_AREA, S_TURN, S_MINPR, S_MINKPR, S_C0, S_CPI, S_HMIN, S_ARGK = range(11)
N_SCALARS = 11


@njit(cache=True)
def pad(z, lobe, g):
    n = z.shape[0]
    zp = np.empty((n + 2 * g, 2))
    zp[g : g + n] = z
    for j in range(1, g + 1):
        if lobe:
            zp[g - j, 0] = -z[j, 0]
            zp[g - j, 1] = -z[j, 1]
            zp[g + n - 1 + j, 0] = -z[n - 1 - j, 0]
            zp[g + n - 1 + j, 1] = -z[n - 1 - j, 1]
        else:
            zp[g - j] = z[n - j]
            zp[g + n - 1 + j] = z[j - 1]
    return zp


@njit(cache=True)
def speed(z, m, lobe):
    """Normal speed h = k + (m-1) p and outward normal nu at every node."""
    n = z.shape[0]
    zp = pad(z, lobe, 2)
    h = np.empty(n)
    nu = np.empty((n, 2))
    for i in range(n):
        a = i + 2
        dx = (zp[a - 2, 0] - 8.0 * zp[a - 1, 0] + 8.0 * zp[a + 1, 0] - zp[a + 2, 0]) / 12.0
        dy = (zp[a - 2, 1] - 8.0 * zp[a - 1, 1] + 8.0 * zp[a + 1, 1] - zp[a + 2, 1]) / 12.0
        nd = np.sqrt(dx * dx + dy * dy)
        nx = dy / nd
        ny = -dx / nd
        nu[i, 0] = nx
        nu[i, 1] = ny
        ax = zp[a, 0] - zp[a - 1, 0]
        ay = zp[a, 1] - zp[a - 1, 1]
        bx = zp[a + 1, 0] - zp[a, 0]
        by = zp[a + 1, 1] - zp[a, 1]
        cx = zp[a + 1, 0] - zp[a - 1, 0]
        cy = zp[a + 1, 1] - zp[a - 1, 1]
        k = 2.0 * (ax * by - ay * bx) / (np.sqrt(ax * ax + ay * ay) * np.sqrt(bx * bx + by * by) * np.sqrt(cx * cx + cy * cy))
        r2 = z[i, 0] * z[i, 0] + z[i, 1] * z[i, 1]
        if (lobe and (i == 0 or i == n - 1)) or r2 == 0.0:
            h[i] = 0.0
        else:
            h[i] = k + (m - 1) * (z[i, 0] * nx + z[i, 1] * ny) / r2
    return h, nu


@njit(cache=True)
def fields(z, m, lobe):
    """k, p, r, nu, segment lengths and lap r at every node."""
    n = z.shape[0]
    zp = pad(z, lobe, 2)
    k = np.empty(n)
    p = np.empty(n)
    r = np.empty(n)
    nu = np.empty((n, 2))
    for i in range(n):
        a = i + 2
        dx = (zp[a - 2, 0] - 8.0 * zp[a - 1, 0] + 8.0 * zp[a + 1, 0] - zp[a + 2, 0]) / 12.0
        dy = (zp[a - 2, 1] - 8.0 * zp[a - 1, 1] + 8.0 * zp[a + 1, 1] - zp[a + 2, 1]) / 12.0
        nd = np.sqrt(dx * dx + dy * dy)
        nu[i, 0] = dy / nd
        nu[i, 1] = -dx / nd
        ax = zp[a, 0] - zp[a - 1, 0]
        ay = zp[a, 1] - zp[a - 1, 1]
        bx = zp[a + 1, 0] - zp[a, 0]
        by = zp[a + 1, 1] - zp[a, 1]
        cx = zp[a + 1, 0] - zp[a - 1, 0]
        cy = zp[a + 1, 1] - zp[a - 1, 1]
        k[i] = 2.0 * (ax * by - ay * bx) / (np.sqrt(ax * ax + ay * ay) * np.sqrt(bx * bx + by * by) * np.sqrt(cx * cx + cy * cy))
        r[i] = np.sqrt(z[i, 0] * z[i, 0] + z[i, 1] * z[i, 1])
        if (lobe and (i == 0 or i == n - 1)) or r[i] == 0.0:
            p[i] = 0.0
        else:
            p[i] = (z[i, 0] * nu[i, 0] + z[i, 1] * nu[i, 1]) / (r[i] * r[i])

    nseg = n - 1 if lobe else n
    seg = np.empty(nseg)
    for i in range(nseg):
        j = i + 1 if i + 1 < n else 0
        ex = z[j, 0] - z[i, 0]
        ey = z[j, 1] - z[i, 1]
        seg[i] = np.sqrt(ex * ex + ey * ey)

    lap = np.empty(n)
    for i in range(n):
        if lobe:
            if i == 0 or i == n - 1:
                lap[i] = 0.0  # r is odd across the endpoint
                continue
            hm = seg[i - 1]
            hp = seg[i]
            rm = r[i - 1]
            rp = r[i + 1]
        else:
            hm = seg[i - 1] if i > 0 else seg[n - 1]
            hp = seg[i]
            rm = r[i - 1] if i > 0 else r[n - 1]
            rp = r[i + 1] if i < n - 1 else r[0]
        lap[i] = 2.0 * (hm * rp - (hp + hm) * r[i] + hp * rm) / (hp * hm * (hp + hm))
    return k, p, r, nu, seg, lap


@njit(cache=True)
def _even_extrap(r1, r2, r3, f1, f2, f3):
    # least squares f = a + b r^2 through three points, value at r = 0
    x1, x2, x3 = r1 * r1, r2 * r2, r3 * r3
    xm = (x1 + x2 + x3) / 3.0
    fm = (f1 + f2 + f3) / 3.0
    sxx = (x1 - xm) ** 2 + (x2 - xm) ** 2 + (x3 - xm) ** 2
    sxf = (x1 - xm) * (f1 - fm) + (x2 - xm) * (f2 - fm) + (x3 - xm) * (f3 - fm)
    return fm - (sxf / sxx) * xm


@njit(cache=True)
def _odd_fit(r, p):
    # least squares p = c r + d r^3, returns c
    s11 = 0.0
    s12 = 0.0
    s22 = 0.0
    b1 = 0.0
    b2 = 0.0
    for i in range(r.shape[0]):
        x1 = r[i]
        x3 = r[i] ** 3
        s11 += x1 * x1
        s12 += x1 * x3
        s22 += x3 * x3
        b1 += x1 * p[i]
        b2 += x3 * p[i]
    det = s11 * s22 - s12 * s12
    return (b1 * s22 - s12 * b2) / det


@njit(cache=True)
def monitor_scalars(k, p, r, seg, m, lobe, taylor_window):
    n = k.shape[0]
    out = np.empty(N_SCALARS)
    maxa2 = 0.0
    maxk = 0.0
    argk = 0
    for i in range(n):
        a2 = k[i] * k[i] + 3.0 * (m - 1) * p[i] * p[i]
        if a2 > maxa2:
            maxa2 = a2
        if abs(k[i]) > maxk:
            maxk = abs(k[i])
            argk = i
    phi = 0.0
    area = 0.0
    turn = 0.0
    hmin = np.inf
    for i in range(seg.shape[0]):
        j = i + 1 if i + 1 < n else 0
        phi += 0.5 * (p[i] + p[j]) * seg[i]
        turn += 0.5 * (k[i] + k[j]) * seg[i]
        area += 0.25 * (r[i] * r[i] * p[i] + r[j] * r[j] * p[j]) * seg[i]
        if seg[i] < hmin:
            hmin = seg[i]
    minpr = np.inf
    minkpr = np.inf
    lo = 1 if lobe else 0
    hi = n - 1 if lobe else n
    for i in range(lo, hi):
        a = p[i] / r[i]
        b = (k[i] - p[i]) / r[i]
        if a < minpr:
            minpr = a
        if b < minkpr:
            minkpr = b
    c0 = np.nan
    cpi = np.nan
    if lobe:
        for e0, e1, e2 in ((1, 2, 3), (n - 2, n - 3, n - 4)):
            a = _even_extrap(r[e0], r[e1], r[e2], p[e0] / r[e0], p[e1] / r[e1], p[e2] / r[e2])
            b = _even_extrap(
                r[e0], r[e1], r[e2],
                (k[e0] - p[e0]) / r[e0], (k[e1] - p[e1]) / r[e1], (k[e2] - p[e2]) / r[e2],
            )
            if a < minpr:
                minpr = a
            if b < minkpr:
                minkpr = b
        w = taylor_window
        c0 = _odd_fit(r[1 : w + 1], p[1 : w + 1])
        cpi = _odd_fit(r[n - 1 - w : n - 1], p[n - 1 - w : n - 1])
    out[S_MAXA] = np.sqrt(maxa2)
    out[S_MAXK] = maxk
    out[S_PHI] = phi
    out[S_AREA] = area
    out[S_TURN] = turn
    out[S_MINPR] = minpr
    out[S_MINKPR] = minkpr
    out[S_C0] = c0
    out[S_CPI] = cpi
    out[S_HMIN] = hmin
    out[S_ARGK] = argk
    return out


@njit(cache=True)
def midpoint_step(z, m, lobe, dt, h0, nu0):
    n = z.shape[0]
    zh = z - 0.5 * dt * (h0.reshape(n, 1) * nu0)
    if lobe:
        zh[0, 0] = zh[0, 1] = zh[n - 1, 0] = zh[n - 1, 1] = 0.0
    h1, nu1 = speed(zh, m, lobe)
    zn = z - dt * (h1.reshape(n, 1) * nu1)
    if lobe:
        zn[0, 0] = zn[0, 1] = zn[n - 1, 0] = zn[n - 1, 1] = 0.0
    return zn


@njit(cache=True)
def resample_uniform(z, lobe):
    """Local cubic (4-point Lagrange) resampling to equal chord-length spacing."""
    n = z.shape[0]
    zp = pad(z, lobe, 2)
    npd = zp.shape[0]
    u = np.empty(npd)
    u[2] = 0.0
    for i in range(3, npd):
        ex = zp[i, 0] - zp[i - 1, 0]
        ey = zp[i, 1] - zp[i - 1, 1]
        u[i] = u[i - 1] + np.sqrt(ex * ex + ey * ey)
    for i in (1, 0):
        ex = zp[i + 1, 0] - zp[i, 0]
        ey = zp[i + 1, 1] - zp[i, 1]
        u[i] = u[i + 1] - np.sqrt(ex * ex + ey * ey)
    if lobe:
        L = u[n + 1]
        nseg = n - 1
    else:
        L = u[n + 2]
        nseg = n
    out = np.empty((n, 2))
    j = 2
    for q in range(n):
        s = L * q / nseg
        while j < n + 1 and u[j + 1] <= s:
            j += 1
        x0, x1, x2, x3 = u[j - 1], u[j], u[j + 1], u[j + 2]
        l0 = (s - x1) * (s - x2) * (s - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3))
        l1 = (s - x0) * (s - x2) * (s - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3))
        l2 = (s - x0) * (s - x1) * (s - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3))
        l3 = (s - x0) * (s - x1) * (s - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2))
        for c in range(2):
            out[q, c] = l0 * zp[j - 1, c] + l1 * zp[j, c] + l2 * zp[j + 1, c] + l3 * zp[j + 2, c]
    if lobe:
        out[0, 0] = out[0, 1] = out[n - 1, 0] = out[n - 1, 1] = 0.0
    return out


# status codes returned by ``advance``
ST_FULL, ST_SNAP, ST_ASTOP, ST_TMAX, ST_MAXSTEPS, ST_DTFLOOR, ST_FAILURE = range(7)
N_COLS = 14  # t dt maxA phi area I_kp minpr minkpr maxk turn c0 cpi evo step


@njit(cache=True)
def write_row(buf, i, t, dt, sc, evo, n_step, lobe):
    turn = sc[S_TURN] if lobe else np.nan
    phi = sc[S_PHI] if lobe else np.nan
    buf[i, 0] = t
    buf[i, 1] = dt
    buf[i, 2] = sc[S_MAXA]
    buf[i, 3] = phi
    buf[i, 4] = sc[S_AREA]
    buf[i, 5] = turn - phi
    buf[i, 6] = sc[S_MINPR]
    buf[i, 7] = sc[S_MINKPR]
    buf[i, 8] = sc[S_MAXK]
    buf[i, 9] = turn
    buf[i, 10] = sc[S_C0]
    buf[i, 11] = sc[S_CPI]
    buf[i, 12] = evo
    buf[i, 13] = n_step


@njit(cache=True)
def evolution_residual(r0, lap0, p0, r1, lap1, p1, dt, m, lobe):
    """max |(r1 - r0)/dt - avg(lap r - m r p^2)| relative to max |avg|, endpoints trimmed."""
    n = r0.shape[0]
    cut = max(2, int(0.02 * n)) if lobe else 0
    err = 0.0
    scale = 0.0
    for i in range(cut, n - cut):
        pred = 0.5 * ((lap0[i] - m * r0[i] * p0[i] ** 2) + (lap1[i] - m * r1[i] * p1[i] ** 2))
        e = abs((r1[i] - r0[i]) / dt - pred)
        if e > err:
            err = e
        if abs(pred) > scale:
            scale = abs(pred)
    return err / scale if scale > 0 else err


@njit(cache=True)
def advance(z, m, lobe, t, n_step, since, cfl, a_stop, t_max, dt_floor, redist, max_steps,
            level, snap_every, taylor_window, buf):
    """Take steps from state z until an event; one row of ``buf`` per accepted step.

    Events: buffer full, capture level or snapshot cadence reached (after the
    step), or a termination condition on the current state.
    """
    k, p, r, nu, seg, lap = fields(z, m, lobe)
    sc = monitor_scalars(k, p, r, seg, m, lobe, taylor_window)
    i = 0
    n = z.shape[0]
    while True:
        if sc[S_MAXA] >= a_stop:
            return ST_ASTOP, i, z, t, n_step, since
        if t_max >= 0.0 and t >= t_max:
            return ST_TMAX, i, z, t, n_step, since
        if n_step >= max_steps:
            return ST_MAXSTEPS, i, z, t, n_step, since
        hmin = sc[S_HMIN]
        dt = cfl * hmin * hmin / (1.0 + sc[S_MAXA] ** 2 * hmin * hmin)
        if dt < dt_floor:
            return ST_DTFLOOR, i, z, t, n_step, since
        if t_max >= 0.0 and t + dt > t_max:
            dt = t_max - t
        h0 = k + (m - 1) * p
        if lobe:
            h0[0] = 0.0
            h0[n - 1] = 0.0
        zn = midpoint_step(z, m, lobe, dt, h0, nu)
        since += 1
        redistributed = redist > 0 and since >= redist
        if redistributed:
            zn = resample_uniform(zn, lobe)
            since = 0
        kn, pn, rn, nun, segn, lapn = fields(zn, m, lobe)
        scn = monitor_scalars(kn, pn, rn, segn, m, lobe, taylor_window)
        bad = not np.isfinite(scn[S_MAXA])
        for q in range(n):
            if not (np.isfinite(zn[q, 0]) and np.isfinite(zn[q, 1])):
                bad = True
        if bad or segn.min() <= 0.0:
            return ST_FAILURE, i, z, t, n_step, since
        evo = np.nan if redistributed else evolution_residual(r, lap, p, rn, lapn, pn, dt, m, lobe)
        z, k, p, r, nu, seg, lap, sc = zn, kn, pn, rn, nun, segn, lapn, scn
        t += dt
        n_step += 1
        write_row(buf, i, t, dt, sc, evo, n_step, lobe)
        i += 1
        if sc[S_MAXK] >= level or (snap_every > 0 and n_step % snap_every == 0):
            return ST_SNAP, i, z, t, n_step, since
        if i == buf.shape[0]:
            return ST_FULL, i, z, t, n_step, since
