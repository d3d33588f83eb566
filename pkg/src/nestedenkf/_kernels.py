"""Numba-compiled integration loops.

These kernels carry the sequential time stepping that dominates run time
(nature runs, ensemble forecasts, the long residual-diagnostic integration).
They reproduce the public tendency/RK4 operations exactly — the test suite
checks the two paths against each other — and draw no random numbers
themselves: AR(1) innovations are pre-colored with the covariance Cholesky
factor outside and passed in, which keeps all sampling on numpy Generators.

Status codes returned by the integrators: 0 = ok, 1 = non-finite state.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _trunc_rhs(x, a0, a1, e, out):
    # x, e, out: (B, n)
    nb, n = x.shape
    for b in range(nb):
        for i in range(n):
            im1 = i - 1 if i >= 1 else n - 1
            im2 = i - 2 if i >= 2 else i - 2 + n
            ip1 = i + 1 if i + 1 < n else 0
            out[b, i] = (-x[b, im1] * (x[b, im2] - x[b, ip1]) - x[b, i]
                         + a0 + a1 * x[b, i] + e[b, i])


@njit(cache=True)
def integrate_truncated(x, e, eta, phi, a0, a1, dt, nsteps, rec_stride, xs_out):
    """Advance the truncated model nsteps steps; x and e are updated in place.

    x : (B, n) member states.
    e : (B, n) AR(1) red-noise states, advanced once per step before the
        RK4 update and held fixed across the four stages.
    eta : (nsteps, B, n) pre-colored innovations, or shape (0, B, n) for a
        deterministic run (e is then held fixed, normally all zeros).
    rec_stride : record x into xs_out every rec_stride steps (0 = never).
    """
    nb, n = x.shape
    q = np.sqrt(1.0 - phi * phi)
    half = 0.5 * dt
    sixth = dt / 6.0
    k1 = np.empty((nb, n))
    k2 = np.empty((nb, n))
    k3 = np.empty((nb, n))
    k4 = np.empty((nb, n))
    tmp = np.empty((nb, n))
    noisy = eta.shape[0] > 0
    rec = 0
    for s in range(nsteps):
        if noisy:
            for b in range(nb):
                for i in range(n):
                    e[b, i] = phi * e[b, i] + q * eta[s, b, i]
        _trunc_rhs(x, a0, a1, e, k1)
        for b in range(nb):
            for i in range(n):
                tmp[b, i] = x[b, i] + half * k1[b, i]
        _trunc_rhs(tmp, a0, a1, e, k2)
        for b in range(nb):
            for i in range(n):
                tmp[b, i] = x[b, i] + half * k2[b, i]
        _trunc_rhs(tmp, a0, a1, e, k3)
        for b in range(nb):
            for i in range(n):
                tmp[b, i] = x[b, i] + dt * k3[b, i]
        _trunc_rhs(tmp, a0, a1, e, k4)
        for b in range(nb):
            for i in range(n):
                x[b, i] = x[b, i] + sixth * (k1[b, i] + 2.0 * k2[b, i]
                                             + 2.0 * k3[b, i] + k4[b, i])
        if rec_stride > 0 and (s + 1) % rec_stride == 0:
            ok = True
            for b in range(nb):
                for i in range(n):
                    xs_out[rec, b, i] = x[b, i]
                    if not np.isfinite(x[b, i]):
                        ok = False
            rec += 1
            if not ok:
                return 1
    for b in range(nb):
        for i in range(n):
            if not np.isfinite(x[b, i]):
                return 1
    return 0


@njit(cache=True)
def _two_scale_rhs(x, y, n, m, f, h, b, c, dx, dy):
    nm = n * m
    hcb = h * c / b
    cb = c * b
    for i in range(n):
        im1 = i - 1 if i >= 1 else n - 1
        im2 = i - 2 if i >= 2 else i - 2 + n
        ip1 = i + 1 if i + 1 < n else 0
        s = 0.0
        for r in range(m * i, m * (i + 1)):
            s += y[r]
        dx[i] = -x[im1] * (x[im2] - x[ip1]) - x[i] + f - hcb * s
    for j in range(nm):
        jp1 = j + 1 if j + 1 < nm else 0
        jp2 = j + 2 if j + 2 < nm else j + 2 - nm
        jm1 = j - 1 if j >= 1 else nm - 1
        dy[j] = -cb * y[jp1] * (y[jp2] - y[jm1]) - c * y[j] + hcb * x[j // m]


@njit(cache=True)
def integrate_two_scale(x, y, n, m, f, h, b, c, dt, nsteps, rec_stride,
                        xs_out, gs_out, ys_out, record_y):
    """Advance the two-scale model nsteps steps; x and y are updated in place.

    Records, every rec_stride steps: the large-scale state into xs_out, the
    per-block small-scale sums into gs_out, and (when record_y) the full
    small-scale state into ys_out.
    """
    nm = n * m
    half = 0.5 * dt
    sixth = dt / 6.0
    kx1 = np.empty(n); ky1 = np.empty(nm)
    kx2 = np.empty(n); ky2 = np.empty(nm)
    kx3 = np.empty(n); ky3 = np.empty(nm)
    kx4 = np.empty(n); ky4 = np.empty(nm)
    tx = np.empty(n); ty = np.empty(nm)
    rec = 0
    for s in range(nsteps):
        _two_scale_rhs(x, y, n, m, f, h, b, c, kx1, ky1)
        for i in range(n):
            tx[i] = x[i] + half * kx1[i]
        for j in range(nm):
            ty[j] = y[j] + half * ky1[j]
        _two_scale_rhs(tx, ty, n, m, f, h, b, c, kx2, ky2)
        for i in range(n):
            tx[i] = x[i] + half * kx2[i]
        for j in range(nm):
            ty[j] = y[j] + half * ky2[j]
        _two_scale_rhs(tx, ty, n, m, f, h, b, c, kx3, ky3)
        for i in range(n):
            tx[i] = x[i] + dt * kx3[i]
        for j in range(nm):
            ty[j] = y[j] + dt * ky3[j]
        _two_scale_rhs(tx, ty, n, m, f, h, b, c, kx4, ky4)
        for i in range(n):
            x[i] = x[i] + sixth * (kx1[i] + 2.0 * kx2[i] + 2.0 * kx3[i] + kx4[i])
        for j in range(nm):
            y[j] = y[j] + sixth * (ky1[j] + 2.0 * ky2[j] + 2.0 * ky3[j] + ky4[j])
        if rec_stride > 0 and (s + 1) % rec_stride == 0:
            ok = True
            for i in range(n):
                xs_out[rec, i] = x[i]
                if not np.isfinite(x[i]):
                    ok = False
                g = 0.0
                for r in range(m * i, m * (i + 1)):
                    g += y[r]
                gs_out[rec, i] = g
            if record_y:
                for j in range(nm):
                    ys_out[rec, j] = y[j]
            rec += 1
            if not ok:
                return 1
    for i in range(n):
        if not np.isfinite(x[i]):
            return 1
    return 0
