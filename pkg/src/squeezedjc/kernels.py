"""Hot numeric kernels, each in a numba flavour and a pure-numpy flavour.

The public names (``poly_log_table``, ``row_series_sums``, ``ground_population``,
``rk4_propagate``) are bound to the numba implementations unless
``SQUEEZEDJC_DISABLE_NUMBA`` is set. The ``*_nb`` / ``*_np`` variants stay
importable so the two paths can be compared.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ._accel import NUMBA_ENABLED, njit

_BIG = 1e150
_LOG_BIG = math.log(_BIG)

# ---------------------------------------------------------------------------
# Scaled terminating polynomial table
#
# Entry [n - n_lo, l] holds sign and natural log of
#     exp(-x/2) * x**((n + 2l)/2) * F(l, n; x) / sqrt(n! (2l)!)
# where F(l, n; x) = sum_j (2l)! n! / ((2l-j)! (n-j)! j!) * (-1/x)**j.
# This is <n|D(sqrt(x))|2l>, bounded by 1 in magnitude.
#
# Three-term recurrence in m = 2l at fixed n (and symmetrically in n at fixed m):
#     u[m+1] = ((x - n + m) u[m] / sqrt(x) - sqrt(m) u[m-1]) / sqrt(m+1)
# The m-direction is only used for m <= (sqrt(n) + sqrt(x))**2; past that
# turning point the wanted solution is recessive and the n-direction (which is
# growing there) takes over.
# ---------------------------------------------------------------------------


@njit
def _poly_log_table_nb(x, n_lo, n_hi, l_max):
    rows = n_hi - n_lo + 1
    width = l_max + 1
    sign = np.zeros((rows, width), np.int8)
    logm = np.full((rows, width), -np.inf)
    sx = math.sqrt(x)
    lx = math.log(x)
    m_max = 2 * l_max
    for r in range(rows):
        n = n_lo + r
        lpn = -0.5 * x + 0.5 * n * lx - 0.5 * math.lgamma(n + 1.0)
        mhi = (math.sqrt(n) + sx) ** 2
        mstop = min(m_max, int(math.floor(mhi)))
        u_prev = 0.0
        u = 1.0
        scale = 0.0
        for m in range(mstop + 1):
            if m % 2 == 0 and u != 0.0:
                sign[r, m // 2] = 1 if u > 0.0 else -1
                logm[r, m // 2] = math.log(abs(u)) + scale + lpn
            u_next = ((x - n + m) * u / sx - math.sqrt(m) * u_prev) / math.sqrt(m + 1.0)
            u_prev = u
            u = u_next
            if abs(u) > _BIG:
                u /= _BIG
                u_prev /= _BIG
                scale += _LOG_BIG
            elif abs(u) < 1.0 / _BIG and abs(u_prev) < 1.0 / _BIG:
                u *= _BIG
                u_prev *= _BIG
                scale -= _LOG_BIG
    for l in range(width):
        m = 2 * l
        t = math.sqrt(m) - sx
        if t <= 0.0:
            continue
        ntop = min(n_hi, int(t * t) + 1)
        if ntop < n_lo:
            continue
        lpm = -0.5 * x + 0.5 * m * lx - 0.5 * math.lgamma(m + 1.0)
        v_prev = 0.0
        v = 1.0
        scale = 0.0
        for n in range(ntop + 1):
            if n >= n_lo and m > (math.sqrt(n) + sx) ** 2 and v != 0.0:
                sign[n - n_lo, l] = 1 if v > 0.0 else -1
                logm[n - n_lo, l] = math.log(abs(v)) + scale + lpm
            v_next = ((x - m + n) * v / sx - math.sqrt(n) * v_prev) / math.sqrt(n + 1.0)
            v_prev = v
            v = v_next
            if abs(v) > _BIG:
                v /= _BIG
                v_prev /= _BIG
                scale += _LOG_BIG
            elif abs(v) < 1.0 / _BIG and abs(v_prev) < 1.0 / _BIG:
                v *= _BIG
                v_prev *= _BIG
                scale -= _LOG_BIG
    return sign, logm


def _rescale(cur, prev, scale):
    big = np.abs(cur) > _BIG
    if big.any():
        cur = np.where(big, cur / _BIG, cur)
        prev = np.where(big, prev / _BIG, prev)
        scale = scale + big * _LOG_BIG
    small = (np.abs(cur) < 1.0 / _BIG) & (np.abs(prev) < 1.0 / _BIG)
    if small.any():
        cur = np.where(small, cur * _BIG, cur)
        prev = np.where(small, prev * _BIG, prev)
        scale = scale - small * _LOG_BIG
    return cur, prev, scale


def _store(sign, logm, rows_mask, col, val, scale, logpref):
    if not rows_mask.any():
        return
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(val)) + scale + logpref
    nz = rows_mask & (val != 0.0)
    sign[nz, col] = np.sign(val[nz]).astype(np.int8)
    logm[nz, col] = lm[nz]


def _poly_log_table_np(x, n_lo, n_hi, l_max):
    rows = n_hi - n_lo + 1
    width = l_max + 1
    sign = np.zeros((rows, width), np.int8)
    logm = np.full((rows, width), -np.inf)
    sx = math.sqrt(x)
    lx = math.log(x)
    ns = np.arange(n_lo, n_hi + 1, dtype=float)
    lpn = -0.5 * x + 0.5 * ns * lx - 0.5 * gammaln(ns + 1.0)
    mhi = (np.sqrt(ns) + sx) ** 2
    m_top = int(min(2 * l_max, math.floor(mhi.max())))

    u_prev = np.zeros(rows)
    u = np.ones(rows)
    scale = np.zeros(rows)
    for m in range(m_top + 1):
        if m % 2 == 0:
            _store(sign, logm, m <= mhi, m // 2, u, scale, lpn)
        u_next = ((x - ns + m) * u / sx - math.sqrt(m) * u_prev) / math.sqrt(m + 1.0)
        u, u_prev, scale = _rescale(u_next, u, scale)

    ms = 2.0 * np.arange(width)
    t = np.sqrt(ms) - sx
    active = t > 0.0
    if active.any():
        ntop = int(min(n_hi, math.floor(t[active].max() ** 2) + 1))
        if ntop >= n_lo:
            cols = np.nonzero(active)[0]
            mm = ms[cols]
            lpm = -0.5 * x + 0.5 * mm * lx - 0.5 * gammaln(mm + 1.0)
            v_prev = np.zeros(cols.size)
            v = np.ones(cols.size)
            vscale = np.zeros(cols.size)
            for n in range(ntop + 1):
                if n >= n_lo:
                    mask = mm > (math.sqrt(n) + sx) ** 2
                    if mask.any():
                        with np.errstate(divide="ignore"):
                            lm = np.log(np.abs(v)) + vscale + lpm
                        sel = mask & (v != 0.0)
                        sign[n - n_lo, cols[sel]] = np.sign(v[sel]).astype(np.int8)
                        logm[n - n_lo, cols[sel]] = lm[sel]
                v_next = ((x - mm + n) * v / sx - math.sqrt(n) * v_prev) / math.sqrt(n + 1.0)
                v, v_prev, vscale = _rescale(v_next, v, vscale)
    return sign, logm


# ---------------------------------------------------------------------------
# Row-wise compensated series sums with the three-small-terms stopping rule.
# Term (row, l) = sign * exp(logm + log_weight[l]) * exp(i * l * psi).
# ---------------------------------------------------------------------------


@njit
def _row_series_sums_nb(sign, logm, log_weight, psi, rel_tol, abs_floor, tail_bound, negligible):
    rows, width = sign.shape
    out_re = np.zeros(rows)
    out_im = np.zeros(rows)
    used = np.zeros(rows, np.int64)
    tail = np.zeros(rows)
    conv = np.zeros(rows, np.bool_)
    cl = np.empty(width)
    sl = np.empty(width)
    for l in range(width):
        cl[l] = math.cos(l * psi)
        sl[l] = math.sin(l * psi)
    for r in range(rows):
        s_re = 0.0
        c_re = 0.0
        s_im = 0.0
        c_im = 0.0
        armed = False
        count = 0
        m1 = 0.0
        m2 = 0.0
        last = 0.0
        done = False
        for l in range(width):
            lw = log_weight[l]
            if sign[r, l] == 0 or lw == -np.inf:
                mag = 0.0
            else:
                mag = math.exp(logm[r, l] + lw)
            last = mag
            tr = sign[r, l] * mag * cl[l]
            ti = sign[r, l] * mag * sl[l]
            # Neumaier update, real and imaginary parts separately
            t = s_re + tr
            if abs(s_re) >= abs(tr):
                c_re += (s_re - t) + tr
            else:
                c_re += (tr - t) + s_re
            s_re = t
            t = s_im + ti
            if abs(s_im) >= abs(ti):
                c_im += (s_im - t) + ti
            else:
                c_im += (ti - t) + s_im
            s_im = t
            acc = math.hypot(s_re + c_re, s_im + c_im)
            if not armed and acc >= abs_floor:
                armed = True
            thresh = rel_tol * max(acc, abs_floor)
            if armed and mag < thresh:
                count += 1
                if count >= 3 and max(mag, m1, m2) < thresh:
                    used[r] = l + 1
                    tail[r] = max(mag, m1, m2)
                    conv[r] = True
                    done = True
                    break
            else:
                count = 0
            m2 = m1
            m1 = mag
        out_re[r] = s_re + c_re
        out_im[r] = s_im + c_im
        if not done:
            used[r] = width
            acc = math.hypot(out_re[r], out_im[r])
            if tail_bound <= rel_tol * max(acc, abs_floor) or tail_bound <= negligible:
                conv[r] = True
                tail[r] = tail_bound
            else:
                tail[r] = max(tail_bound, last)
    return out_re, out_im, used, tail, conv


def _row_series_sums_np(sign, logm, log_weight, psi, rel_tol, abs_floor, tail_bound, negligible):
    rows, width = sign.shape
    s_re = np.zeros(rows)
    c_re = np.zeros(rows)
    s_im = np.zeros(rows)
    c_im = np.zeros(rows)
    armed = np.zeros(rows, bool)
    count = np.zeros(rows, np.int64)
    m1 = np.zeros(rows)
    m2 = np.zeros(rows)
    last = np.zeros(rows)
    live = np.ones(rows, bool)
    used = np.full(rows, width, np.int64)
    tail = np.zeros(rows)
    conv = np.zeros(rows, bool)
    for l in range(width):
        if not live.any():
            break
        lw = log_weight[l]
        if lw == -np.inf:
            mag = np.zeros(rows)
        else:
            with np.errstate(under="ignore"):
                mag = np.where(sign[:, l] != 0, np.exp(logm[:, l] + lw), 0.0)
        mag = np.where(live, mag, 0.0)
        last = np.where(live, mag, last)
        sg = sign[:, l]
        tr = sg * mag * math.cos(l * psi)
        ti = sg * mag * math.sin(l * psi)
        t = s_re + tr
        c_re += np.where(np.abs(s_re) >= np.abs(tr), (s_re - t) + tr, (tr - t) + s_re)
        s_re = t
        t = s_im + ti
        c_im += np.where(np.abs(s_im) >= np.abs(ti), (s_im - t) + ti, (ti - t) + s_im)
        s_im = t
        acc = np.hypot(s_re + c_re, s_im + c_im)
        armed |= live & (acc >= abs_floor)
        thresh = rel_tol * np.maximum(acc, abs_floor)
        small = live & armed & (mag < thresh)
        count = np.where(small, count + 1, 0)
        worst = np.maximum(mag, np.maximum(m1, m2))
        stop = small & (count >= 3) & (worst < thresh)
        used[stop] = l + 1
        tail[stop] = worst[stop]
        conv[stop] = True
        live &= ~stop
        m2 = m1
        m1 = mag
    out_re = s_re + c_re
    out_im = s_im + c_im
    if live.any():
        acc = np.hypot(out_re, out_im)
        ok = (tail_bound <= rel_tol * np.maximum(acc, abs_floor)) | (tail_bound <= negligible)
        fin = live & ok
        conv[fin] = True
        tail[fin] = tail_bound
        bad = live & ~ok
        tail[bad] = np.maximum(tail_bound, last[bad])
    return out_re, out_im, used, tail, conv


# ---------------------------------------------------------------------------
# Ground-state population of a mixture of independent two-level doublets:
#     P(t) = sum_k w_k * (1 - kappa_k * (1 - cos(omega_k t)) / 2)
# ---------------------------------------------------------------------------


@njit
def _ground_population_nb(weights, omegas, kappas, times):
    nt = times.shape[0]
    nk = weights.shape[0]
    out = np.empty(nt)
    w0 = 0.0
    for k in range(nk):
        w0 += weights[k]
    for i in range(nt):
        t = times[i]
        acc = 0.0
        for k in range(nk):
            acc += weights[k] * kappas[k] * (1.0 - math.cos(omegas[k] * t))
        out[i] = w0 - 0.5 * acc
    return out


def _ground_population_np(weights, omegas, kappas, times):
    weights = np.asarray(weights, float)
    wk = weights * kappas
    w0 = weights.sum()
    out = np.empty(len(times))
    chunk = max(1, 4_000_000 // max(1, len(weights)))
    for i in range(0, len(times), chunk):
        tt = times[i : i + chunk]
        out[i : i + chunk] = w0 - 0.5 * ((1.0 - np.cos(np.outer(tt, omegas))) @ wk)
    return out


# ---------------------------------------------------------------------------
# Fixed-step RK4 for i d/dt psi = H psi with the two-level x Fock structure
#     (H psi)_2 = hd c2 + p c1 + q (a c1) + s (a^dag c1)
#     (H psi)_1 = -hd c1 + p* c2 + q* (a^dag c2) + s* (a c2)
# c1 holds the ground-state amplitudes, c2 the excited ones.
# ---------------------------------------------------------------------------


@njit
def _apply_h_nb(c1, c2, hd, p, q, s, sq, o1, o2):
    n_dim = c1.shape[0]
    pc = p.conjugate()
    qc = q.conjugate()
    sc = s.conjugate()
    for n in range(n_dim):
        if n + 1 < n_dim:
            a1 = sq[n + 1] * c1[n + 1]
            a2 = sq[n + 1] * c2[n + 1]
        else:
            a1 = 0j
            a2 = 0j
        if n > 0:
            ad1 = sq[n] * c1[n - 1]
            ad2 = sq[n] * c2[n - 1]
        else:
            ad1 = 0j
            ad2 = 0j
        o2[n] = hd * c2[n] + p * c1[n] + q * a1 + s * ad1
        o1[n] = -hd * c1[n] + pc * c2[n] + qc * ad2 + sc * a2


@njit
def _rk4_propagate_nb(c1, c2, hd, p, q, s, steps, hs, edge_start):
    n_dim = c1.shape[0]
    nseg = steps.shape[0]
    sq = np.sqrt(np.arange(n_dim + 1) * 1.0)
    pop = np.empty(nseg + 1)
    norm = np.empty(nseg + 1)
    edge = np.empty(nseg + 1)
    k1a = np.empty(n_dim, np.complex128)
    k1b = np.empty(n_dim, np.complex128)
    k2a = np.empty(n_dim, np.complex128)
    k2b = np.empty(n_dim, np.complex128)
    k3a = np.empty(n_dim, np.complex128)
    k3b = np.empty(n_dim, np.complex128)
    k4a = np.empty(n_dim, np.complex128)
    k4b = np.empty(n_dim, np.complex128)
    ta = np.empty(n_dim, np.complex128)
    tb = np.empty(n_dim, np.complex128)
    for k in range(nseg + 1):
        if k > 0:
            h = hs[k - 1]
            mh = -1j * h
            for _ in range(steps[k - 1]):
                _apply_h_nb(c1, c2, hd, p, q, s, sq, k1a, k1b)
                for i in range(n_dim):
                    ta[i] = c1[i] + 0.5 * mh * k1a[i]
                    tb[i] = c2[i] + 0.5 * mh * k1b[i]
                _apply_h_nb(ta, tb, hd, p, q, s, sq, k2a, k2b)
                for i in range(n_dim):
                    ta[i] = c1[i] + 0.5 * mh * k2a[i]
                    tb[i] = c2[i] + 0.5 * mh * k2b[i]
                _apply_h_nb(ta, tb, hd, p, q, s, sq, k3a, k3b)
                for i in range(n_dim):
                    ta[i] = c1[i] + mh * k3a[i]
                    tb[i] = c2[i] + mh * k3b[i]
                _apply_h_nb(ta, tb, hd, p, q, s, sq, k4a, k4b)
                for i in range(n_dim):
                    c1[i] += mh / 6.0 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i])
                    c2[i] += mh / 6.0 * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i])
        p1 = 0.0
        p2 = 0.0
        pe = 0.0
        for i in range(n_dim):
            a = c1[i].real ** 2 + c1[i].imag ** 2
            b = c2[i].real ** 2 + c2[i].imag ** 2
            p1 += a
            p2 += b
            if i >= edge_start:
                pe += a + b
        pop[k] = p1
        norm[k] = p1 + p2
        edge[k] = pe
    return pop, norm, edge


def _apply_h_np(c1, c2, hd, p, q, s, sq):
    a1 = np.zeros_like(c1)
    a2 = np.zeros_like(c2)
    ad1 = np.zeros_like(c1)
    ad2 = np.zeros_like(c2)
    a1[:-1] = sq[1:-1] * c1[1:]
    a2[:-1] = sq[1:-1] * c2[1:]
    ad1[1:] = sq[1:-1] * c1[:-1]
    ad2[1:] = sq[1:-1] * c2[:-1]
    o2 = hd * c2 + p * c1 + q * a1 + s * ad1
    o1 = -hd * c1 + np.conj(p) * c2 + np.conj(q) * ad2 + np.conj(s) * a2
    return o1, o2


def _rk4_propagate_np(c1, c2, hd, p, q, s, steps, hs, edge_start):
    n_dim = c1.shape[0]
    sq = np.sqrt(np.arange(n_dim + 1, dtype=float))
    nseg = len(steps)
    pop = np.empty(nseg + 1)
    norm = np.empty(nseg + 1)
    edge = np.empty(nseg + 1)
    x1 = c1.copy()
    x2 = c2.copy()
    for k in range(nseg + 1):
        if k > 0:
            mh = -1j * hs[k - 1]
            for _ in range(int(steps[k - 1])):
                k1a, k1b = _apply_h_np(x1, x2, hd, p, q, s, sq)
                k2a, k2b = _apply_h_np(x1 + 0.5 * mh * k1a, x2 + 0.5 * mh * k1b, hd, p, q, s, sq)
                k3a, k3b = _apply_h_np(x1 + 0.5 * mh * k2a, x2 + 0.5 * mh * k2b, hd, p, q, s, sq)
                k4a, k4b = _apply_h_np(x1 + mh * k3a, x2 + mh * k3b, hd, p, q, s, sq)
                x1 = x1 + mh / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                x2 = x2 + mh / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        a = x1.real**2 + x1.imag**2
        b = x2.real**2 + x2.imag**2
        pop[k] = a.sum()
        norm[k] = pop[k] + b.sum()
        edge[k] = a[edge_start:].sum() + b[edge_start:].sum()
    c1[:] = x1
    c2[:] = x2
    return pop, norm, edge


if NUMBA_ENABLED:
    poly_log_table = _poly_log_table_nb
    row_series_sums = _row_series_sums_nb
    ground_population = _ground_population_nb
    rk4_propagate = _rk4_propagate_nb
else:
    poly_log_table = _poly_log_table_np
    row_series_sums = _row_series_sums_np
    ground_population = _ground_population_np
    rk4_propagate = _rk4_propagate_np

poly_log_table_nb = _poly_log_table_nb
poly_log_table_np = _poly_log_table_np
row_series_sums_nb = _row_series_sums_nb
row_series_sums_np = _row_series_sums_np
ground_population_nb = _ground_population_nb
ground_population_np = _ground_population_np
rk4_propagate_nb = _rk4_propagate_nb
rk4_propagate_np = _rk4_propagate_np
