"""Compiled inner loops: polynomial vector fields, Dormand-Prince 5(4), QR sweeps.

Every vector field handled by the package is a polynomial, stored as a term
table ``(coef, out, exps)``: term ``k`` contributes
``coef[k] * prod_j x[j] ** exps[k, j]`` to component ``out[k]``.
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

STATUS_OK = 0
STATUS_ESCAPE = 1
STATUS_STIFF = 2


@njit(cache=True)
def poly_eval(coef, out, exps, x, f):
    n = x.size
    for i in range(n):
        f[i] = 0.0
    for k in range(coef.size):
        v = coef[k]
        for j in range(n):
            e = exps[k, j]
            if e > 0:
                v *= x[j] ** e
        f[out[k]] += v


@njit(cache=True)
def poly_jac(coef, out, exps, x, jac):
    n = x.size
    for i in range(n):
        for j in range(n):
            jac[i, j] = 0.0
    for k in range(coef.size):
        for j in range(n):
            ej = exps[k, j]
            if ej == 0:
                continue
            v = coef[k] * ej * x[j] ** (ej - 1)
            for l in range(n):
                if l != j:
                    e = exps[k, l]
                    if e > 0:
                        v *= x[l] ** e
            jac[out[k], j] += v


@njit(cache=True)
def _rhs(coef, out, exps, n, variational, y, dy, jac):
    x = y[:n]
    poly_eval(coef, out, exps, x, dy[:n])
    if variational:
        poly_jac(coef, out, exps, x, jac)
        # dPhi/dt = DX(x) Phi, Phi stored row-major after the state
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += jac[i, l] * y[n + l * n + j]
                dy[n + i * n + j] = s


@njit(cache=True)
def integrate_windows(coef, out, exps, x0, dt, m, rtol, atol, h0,
                      variational, renorm_max, escape):
    """Integrate ``m`` windows of length ``dt`` starting from ``x0``.

    In variational mode the tangent map is restarted from the identity at the
    start of every window, so ``phis[i]`` is the derivative of the time-``dt``
    map at ``xs[i]`` (times ``exp(logs[i])``).

    Returns ``xs, phis, logs, status, completed_windows, h``.
    """
    n = x0.size
    dim = n + n * n if variational else n
    xs = np.empty((m + 1, n))
    phis = np.empty((m if variational else 0, n, n))
    logs = np.zeros(m)
    y = np.zeros(dim)
    y[:n] = x0
    xs[0, :] = x0
    jac = np.empty((n, n))
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    k5 = np.empty(dim)
    k6 = np.empty(dim)
    k7 = np.empty(dim)
    yt = np.empty(dim)
    ynew = np.empty(dim)
    h = h0 if h0 > 0.0 else dt * 0.01
    for w in range(m):
        if variational:
            for i in range(n * n):
                y[n + i] = 0.0
            for i in range(n):
                y[n + i * n + i] = 1.0
        _rhs(coef, out, exps, n, variational, y, k1, jac)
        t = 0.0
        while t < dt:
            last = False
            hh = h
            if t + hh >= dt * (1.0 - 1e-13):
                hh = dt - t
                last = True
            for i in range(dim):
                yt[i] = y[i] + hh * _A21 * k1[i]
            _rhs(coef, out, exps, n, variational, yt, k2, jac)
            for i in range(dim):
                yt[i] = y[i] + hh * (_A31 * k1[i] + _A32 * k2[i])
            _rhs(coef, out, exps, n, variational, yt, k3, jac)
            for i in range(dim):
                yt[i] = y[i] + hh * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            _rhs(coef, out, exps, n, variational, yt, k4, jac)
            for i in range(dim):
                yt[i] = y[i] + hh * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            _rhs(coef, out, exps, n, variational, yt, k5, jac)
            for i in range(dim):
                yt[i] = y[i] + hh * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                     + _A64 * k4[i] + _A65 * k5[i])
            _rhs(coef, out, exps, n, variational, yt, k6, jac)
            for i in range(dim):
                ynew[i] = y[i] + hh * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                       + _B5 * k5[i] + _B6 * k6[i])
            _rhs(coef, out, exps, n, variational, ynew, k7, jac)
            err = 0.0
            for i in range(dim):
                e = hh * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                          + _E6 * k6[i] + _E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                err += (e / sc) ** 2
            err = np.sqrt(err / dim)
            if err <= 1.0:
                t = dt if last else t + hh
                for i in range(dim):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                hn = hh * fac
                h = max(h, hn) if last else hn
                xn = 0.0
                for i in range(n):
                    xn += y[i] * y[i]
                if np.sqrt(xn) > escape:
                    return xs, phis, logs, STATUS_ESCAPE, w, h
                if variational:
                    pn = 0.0
                    for i in range(n * n):
                        pn = max(pn, abs(y[n + i]))
                    if pn > renorm_max:
                        for i in range(n * n):
                            y[n + i] /= pn
                        logs[w] += np.log(pn)
                        # keep FSAL derivative consistent with the rescaled state
                        _rhs(coef, out, exps, n, variational, y, k1, jac)
            else:
                h = hh * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-13 * dt:
                return xs, phis, logs, STATUS_STIFF, w, h
        xs[w + 1, :] = y[:n]
        if variational:
            for i in range(n):
                for j in range(n):
                    phis[w, i, j] = y[n + i * n + j]
    return xs, phis, logs, STATUS_OK, m, h


@njit(cache=True)
def _orthonormalize(a, r):
    # modified Gram-Schmidt, applied twice for stability
    n, k = a.shape
    for j in range(k):
        r[j, j] = 0.0
    for j in range(k):
        for _ in range(2):
            for i in range(j):
                s = 0.0
                for l in range(n):
                    s += a[l, i] * a[l, j]
                for l in range(n):
                    a[l, j] -= s * a[l, i]
        s = 0.0
        for l in range(n):
            s += a[l, j] * a[l, j]
        s = np.sqrt(s)
        r[j, j] = s
        if s > 0.0:
            for l in range(n):
                a[l, j] /= s


@njit(cache=True)
def qr_sweep(factors, q0, store_frames):
    """Push the frame ``q0`` through ``factors`` with re-orthonormalisation.

    Returns ``(frames, logdiag)``: ``frames[i]`` is the frame before factor
    ``i`` is applied (``frames[m]`` the final one), ``logdiag[i]`` the log of
    the Gram-Schmidt stretch factors produced by factor ``i``.
    """
    m = factors.shape[0]
    n, k = q0.shape
    frames = np.empty((m + 1 if store_frames else 1, n, k))
    logdiag = np.empty((m, k))
    q = q0.copy()
    z = np.empty((n, k))
    r = np.empty((k, k))
    if store_frames:
        frames[0] = q
    for i in range(m):
        a = factors[i]
        for row in range(n):
            for col in range(k):
                s = 0.0
                for l in range(n):
                    s += a[row, l] * q[l, col]
                z[row, col] = s
        _orthonormalize(z, r)
        for col in range(k):
            logdiag[i, col] = np.log(r[col, col]) if r[col, col] > 0.0 else -np.inf
        q[:, :] = z
        if store_frames:
            frames[i + 1] = q
    if not store_frames:
        frames[0] = q
    return frames, logdiag


@njit(cache=True)
def running_log_norms(factors, logs, left):
    """``log ||P_k||_2`` for the running products of ``factors``.

    With ``left`` the product grows as ``A_k ... A_0``, otherwise as
    ``A_0 ... A_k``. ``logs[k]`` is the log-scale carried by ``A_k``.
    """
    m, d, _ = factors.shape
    out = np.empty(m)
    p = np.eye(d)
    acc = 0.0
    for k in range(m):
        if left:
            p = factors[k] @ p
        else:
            p = p @ factors[k]
        s = np.linalg.svd(p)[1][0]
        if s > 0.0:
            p = p / s
            acc += np.log(s)
        else:
            acc = -np.inf
        acc += logs[k]
        out[k] = acc
    return out


@njit(cache=True)
def window_log_norms(factors, logs, starts, length, left):
    """``log ||.||_2`` of the product of ``length`` factors from each start.

    ``left`` multiplies on the left (``A_{s+L-1} ... A_s``), otherwise on the
    right (``A_s ... A_{s+L-1}``, used for products of inverses).
    """
    d = factors.shape[1]
    out = np.empty(starts.size)
    for j in range(starts.size):
        s = starts[j]
        p = np.eye(d)
        acc = 0.0
        for k in range(s, s + length):
            if left:
                p = factors[k] @ p
            else:
                p = p @ factors[k]
            nrm = np.sqrt(np.sum(p * p))
            if nrm > 0.0:
                p = p / nrm
                acc += np.log(nrm)
            acc += logs[k]
        sv = np.linalg.svd(p)[1][0]
        out[j] = acc + np.log(sv) if sv > 0.0 else -np.inf
    return out


@njit(cache=True)
def window_products(factors, logs, starts, length, left):
    """Frobenius-normalised products of ``length`` factors from each start.

    Returns ``(mats, scales)`` with product ``= exp(scales[j]) * mats[j]``;
    ``left`` as in :func:`window_log_norms`.
    """
    d = factors.shape[1]
    mats = np.empty((starts.size, d, d))
    scales = np.empty(starts.size)
    for j in range(starts.size):
        p = np.eye(d)
        acc = 0.0
        for k in range(starts[j], starts[j] + length):
            if left:
                p = factors[k] @ p
            else:
                p = p @ factors[k]
            nrm = np.sqrt(np.sum(p * p))
            p = p / nrm
            acc += np.log(nrm) + logs[k]
        mats[j] = p
        scales[j] = acc
    return mats, scales
