"""Compiled inner loops for long trajectory runs and lag-product sums.

Everything here operates on plain arrays and scalars; the wrapper modules
own validation, packing, and unit handling.  Deterministic-part stepping is
a fixed-step fifth-order Runge-Kutta (the 6-stage fifth-order solution of
the Dormand-Prince pair), with optional second-order and Euler variants for
scheme comparisons.  Noise is added after the deterministic substep as an
Euler increment.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1

SCHEME_RK5 = 0
SCHEME_RK2 = 1
SCHEME_EULER = 2

# Dormand-Prince stage and weight coefficients (fifth-order solution).
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)


@njit(inline="always")
def _quad_rhs(z, dz, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc):
    """Shared quadratic RHS: z[0] = x (ignored when damp_x is false),
    z[1:] = y.  Coefficient arrays carry any 1/eps factors pre-folded."""
    x = z[0]
    if damp_x:
        dz[0] = -gamma * x
    else:
        dz[0] = 0.0
    for i in range(1, z.shape[0]):
        dz[i] = 0.0
    for m in range(axc.shape[0]):
        dz[0] += axc[m] * z[axj[m]] * z[axk[m]]
    for m in range(ayc.shape[0]):
        dz[ayt[m]] += ayc[m] * x * z[ayf[m]]
    for m in range(bc.shape[0]):
        dz[bt[m]] += bc[m] * z[bf1[m]] * z[bf2[m]]


@njit(inline="always")
def _det_step(z, dt, scheme, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc, k1, k2, k3, k4, k5, k6, zt):
    """One deterministic step in place on z."""
    d = z.shape[0]
    _quad_rhs(z, k1, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    if scheme == SCHEME_EULER:
        for i in range(d):
            z[i] += dt * k1[i]
        return
    if scheme == SCHEME_RK2:
        for i in range(d):
            zt[i] = z[i] + 0.5 * dt * k1[i]
        _quad_rhs(zt, k2, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
                  bt, bf1, bf2, bc)
        for i in range(d):
            z[i] += dt * k2[i]
        return
    for i in range(d):
        zt[i] = z[i] + dt * _A21 * k1[i]
    _quad_rhs(zt, k2, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    for i in range(d):
        zt[i] = z[i] + dt * (_A31 * k1[i] + _A32 * k2[i])
    _quad_rhs(zt, k3, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    for i in range(d):
        zt[i] = z[i] + dt * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _quad_rhs(zt, k4, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    for i in range(d):
        zt[i] = z[i] + dt * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                             + _A54 * k4[i])
    _quad_rhs(zt, k5, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    for i in range(d):
        zt[i] = z[i] + dt * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                             + _A64 * k4[i] + _A65 * k5[i])
    _quad_rhs(zt, k6, gamma, damp_x, axj, axk, axc, ayt, ayf, ayc,
              bt, bf1, bf2, bc)
    for i in range(d):
        z[i] += dt * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                      + _B5 * k5[i] + _B6 * k6[i])


@njit(cache=True, nogil=True)
def fast_bath_run(y0, bt, bf1, bf2, bc, sj, sk, sc, dt, nsteps,
                  record_stride, scheme, renormalize, renorm_tol, record_s,
                  blowup):
    """Integrate the isolated fast bath; record y snapshots and, optionally,
    the coupling-weighted pair sum s(t) = sum_m sc[m]*y[sj[m]]*y[sk[m]] at
    every step.

    Index arrays bt/bf1/bf2 and sj/sk are 0-based into y.  Returns
    (y_records, s_records, status, bad_step, max_rel_drift, renorm_count,
    y_final).
    """
    n = y0.shape[0]
    d = n + 1
    z = np.zeros(d)
    for i in range(n):
        z[i + 1] = y0[i]
    # shift bath indices into the packed [x, y_1..y_n] layout
    pt = bt + 1
    pf1 = bf1 + 1
    pf2 = bf2 + 1
    e0 = 0.0
    for i in range(n):
        e0 += y0[i] * y0[i]

    ax_e = np.empty(0, dtype=np.int64)
    ac_e = np.empty(0)
    ay_e = np.empty(0, dtype=np.int64)
    ayc_e = np.empty(0)

    nrec = nsteps // record_stride + 1
    y_rec = np.empty((nrec, n))
    ns = nsteps + 1 if record_s else 1
    s_rec = np.zeros(ns)

    k1 = np.empty(d); k2 = np.empty(d); k3 = np.empty(d)
    k4 = np.empty(d); k5 = np.empty(d); k6 = np.empty(d)
    zt = np.empty(d)

    for i in range(n):
        y_rec[0, i] = z[i + 1]
    if record_s:
        acc = 0.0
        for m in range(sc.shape[0]):
            acc += sc[m] * z[sj[m] + 1] * z[sk[m] + 1]
        s_rec[0] = acc

    status = STATUS_OK
    bad_step = -1
    max_drift = 0.0
    renorm_count = 0
    for step in range(1, nsteps + 1):
        _det_step(z, dt, scheme, 0.0, False, ax_e, ax_e, ac_e, ay_e, ay_e,
                  ayc_e, pt, pf1, pf2, bc, k1, k2, k3, k4, k5, k6, zt)
        e = 0.0
        for i in range(1, d):
            e += z[i] * z[i]
        if not np.isfinite(e) or e > blowup:
            status = STATUS_BLOWUP
            bad_step = step
            break
        if e0 > 0.0:
            rel = abs(e / e0 - 1.0)
            if rel > max_drift:
                max_drift = rel
            if renormalize and rel > renorm_tol:
                r = np.sqrt(e0 / e)
                for i in range(1, d):
                    z[i] *= r
                renorm_count += 1
        if record_s:
            acc = 0.0
            for m in range(sc.shape[0]):
                acc += sc[m] * z[sj[m] + 1] * z[sk[m] + 1]
            s_rec[step] = acc
        if step % record_stride == 0:
            r = step // record_stride
            for i in range(n):
                y_rec[r, i] = z[i + 1]

    y_final = np.empty(n)
    for i in range(n):
        y_final[i] = z[i + 1]
    return y_rec, s_rec, status, bad_step, max_drift, renorm_count, y_final


@njit(cache=True, nogil=True)
def full_model_run(x0, y0, gamma, sigma, axj, axk, axc, ayt, ayf, ayc,
                   bt, bf1, bf2, bc, dt, nsteps, record_stride, scheme,
                   gen, blowup):
    """Integrate the full slow-fast model: deterministic substep, then the
    Euler noise increment sigma*sqrt(dt)*xi applied to x.

    Coefficient arrays must carry the 1/eps (xyy) and 1/eps^2 (yyy) factors;
    index arrays are 0-based into the packed state [x, y_1..y_n].  Returns
    (records, status, bad_step) with records columns [x, y_1..y_n].
    """
    n = y0.shape[0]
    d = n + 1
    z = np.empty(d)
    z[0] = x0
    for i in range(n):
        z[i + 1] = y0[i]

    nrec = nsteps // record_stride + 1
    rec = np.empty((nrec, d))
    for i in range(d):
        rec[0, i] = z[i]

    k1 = np.empty(d); k2 = np.empty(d); k3 = np.empty(d)
    k4 = np.empty(d); k5 = np.empty(d); k6 = np.empty(d)
    zt = np.empty(d)

    sqdt = np.sqrt(dt)
    status = STATUS_OK
    bad_step = -1
    for step in range(1, nsteps + 1):
        _det_step(z, dt, scheme, gamma, True, axj, axk, axc, ayt, ayf, ayc,
                  bt, bf1, bf2, bc, k1, k2, k3, k4, k5, k6, zt)
        z[0] += sigma * sqdt * gen.standard_normal()
        ok = True
        for i in range(d):
            if not np.isfinite(z[i]) or abs(z[i]) > blowup:
                ok = False
        if not ok:
            status = STATUS_BLOWUP
            bad_step = step
            break
        if step % record_stride == 0:
            r = step // record_stride
            for i in range(d):
                rec[r, i] = z[i]
    return rec, status, bad_step


@njit(inline="always")
def _reduced_rhs(x, e, gamma, cx, ce):
    """Drift of the reduced (x, E) system with E clamped at zero inside the
    fractional powers; cx = (n+1)*M/n^1.5, ce = 2*M/n^1.5."""
    ec = e if e > 0.0 else 0.0
    se = np.sqrt(ec)
    dx = -gamma * x - cx * x * se
    de = -ce * ec * se + 2.0 * cx * x * x * se
    return dx, de


@njit(cache=True, nogil=True)
def reduced_model_run(x0, e0, gamma, sigma, n, m_const, dt, nsteps,
                      record_stride, scheme, gen, blowup):
    """Integrate the reduced (x, E) system.  One shared normal drives the
    coupled x/E noise column; E is clamped at zero after each step.

    Returns (records[x, E], clamp_count, status, bad_step).
    """
    inv_n15 = 1.0 / (n * np.sqrt(n))
    cx = (n + 1.0) * m_const * inv_n15
    ce = 2.0 * m_const * inv_n15
    sq2m = np.sqrt(2.0 * m_const)
    inv_n = 1.0 / n
    sqdt = np.sqrt(dt)

    nrec = nsteps // record_stride + 1
    rec = np.empty((nrec, 2))
    x = x0
    e = e0
    rec[0, 0] = x
    rec[0, 1] = e

    clamp_count = 0
    status = STATUS_OK
    bad_step = -1
    for step in range(1, nsteps + 1):
        if scheme == SCHEME_EULER:
            k1x, k1e = _reduced_rhs(x, e, gamma, cx, ce)
            x += dt * k1x
            e += dt * k1e
        elif scheme == SCHEME_RK2:
            k1x, k1e = _reduced_rhs(x, e, gamma, cx, ce)
            k2x, k2e = _reduced_rhs(x + 0.5 * dt * k1x, e + 0.5 * dt * k1e,
                                    gamma, cx, ce)
            x += dt * k2x
            e += dt * k2e
        else:
            k1x, k1e = _reduced_rhs(x, e, gamma, cx, ce)
            k2x, k2e = _reduced_rhs(x + dt * _A21 * k1x,
                                    e + dt * _A21 * k1e, gamma, cx, ce)
            k3x, k3e = _reduced_rhs(x + dt * (_A31 * k1x + _A32 * k2x),
                                    e + dt * (_A31 * k1e + _A32 * k2e),
                                    gamma, cx, ce)
            k4x, k4e = _reduced_rhs(
                x + dt * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
                e + dt * (_A41 * k1e + _A42 * k2e + _A43 * k3e),
                gamma, cx, ce)
            k5x, k5e = _reduced_rhs(
                x + dt * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
                e + dt * (_A51 * k1e + _A52 * k2e + _A53 * k3e + _A54 * k4e),
                gamma, cx, ce)
            k6x, k6e = _reduced_rhs(
                x + dt * (_A61 * k1x + _A62 * k2x + _A63 * k3x
                          + _A64 * k4x + _A65 * k5x),
                e + dt * (_A61 * k1e + _A62 * k2e + _A63 * k3e
                          + _A64 * k4e + _A65 * k5e),
                gamma, cx, ce)
            x += dt * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x
                       + _B6 * k6x)
            e += dt * (_B1 * k1e + _B3 * k3e + _B4 * k4e + _B5 * k5e
                       + _B6 * k6e)

        # Euler noise at the post-deterministic point; xi2 is shared so the
        # E increment is exactly -2x times the x increment.
        xi1 = gen.standard_normal()
        xi2 = gen.standard_normal()
        u = e * inv_n
        if u < 0.0:
            u = 0.0
        u34 = np.sqrt(u * np.sqrt(u))
        w2 = sq2m * u34 * sqdt * xi2
        xpre = x
        x += sigma * sqdt * xi1 + w2
        e += -2.0 * xpre * w2
        if e < 0.0:
            e = 0.0
            clamp_count += 1

        if not (np.isfinite(x) and np.isfinite(e)) or abs(x) > blowup \
                or e > blowup:
            status = STATUS_BLOWUP
            bad_step = step
            break
        if step % record_stride == 0:
            r = step // record_stride
            rec[r, 0] = x
            rec[r, 1] = e
    return rec, clamp_count, status, bad_step


@njit(cache=True, nogil=True)
def lag_product_sums(a, b, n_lags, lag_stride):
    """sums[l] = sum_t a[t]*b[t + l*lag_stride] over all admissible origins."""
    N = a.shape[0]
    out = np.zeros(n_lags)
    for li in range(n_lags):
        lag = li * lag_stride
        acc = 0.0
        for t in range(N - lag):
            acc += a[t] * b[t + lag]
        out[li] = acc
    return out


@njit(cache=True, nogil=True)
def blocked_lag_product_means(a, b, n_lags, lag_stride, origin_stride,
                              n_blocks):
    """Per-block means of a[t]*b[t+lag] with origins t restricted to
    [0, N - max_lag) so every lag sees the same origin set.  Blocks partition
    the origins contiguously; products may extend past the block edge."""
    N = a.shape[0]
    max_lag = (n_lags - 1) * lag_stride
    n_origins = N - max_lag
    block_len = n_origins // n_blocks
    means = np.zeros((n_blocks, n_lags))
    for bi in range(n_blocks):
        start = bi * block_len
        stop = start + block_len
        for li in range(n_lags):
            lag = li * lag_stride
            acc = 0.0
            cnt = 0
            for t in range(start, stop, origin_stride):
                acc += a[t] * b[t + lag]
                cnt += 1
            means[bi, li] = acc / cnt
    return means
