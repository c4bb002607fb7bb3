"""Compiled RK4 kernels.

Complex arrays are split into real and imaginary parts so that the inner
loops vectorize.  Quantum blocks are laid out ``(dim, k)`` and classical
ensembles ``(L, samples)``; the innermost loop always runs over the
contiguous axis.
"""

import numpy as np
from numba import njit

CHUNK = 256


@njit(cache=True, inline="always")
def _drive(shape, J0, tau, reverse, t):
    if reverse:
        t = tau - t
    if shape == 0:
        return J0 * (t - t * t / tau)
    return J0


@njit(cache=True, nogil=True)
def _sparse_rhs(diag, indptr, indices, data, J, inv_hbar, cr, ci, outr, outi):
    # d c/dt = -(i/hbar) (D - J K) c
    dim, k = cr.shape
    for i in range(dim):
        for m in range(k):
            outr[i, m] = 0.0
            outi[i, m] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            col = indices[p]
            a = data[p]
            for m in range(k):
                outr[i, m] += a * cr[col, m]
                outi[i, m] += a * ci[col, m]
        d = diag[i]
        for m in range(k):
            ar = d * cr[i, m] - J * outr[i, m]
            ai = d * ci[i, m] - J * outi[i, m]
            outr[i, m] = ai * inv_hbar
            outi[i, m] = -ar * inv_hbar


@njit(cache=True, nogil=True)
def rk4_sparse(diag, indptr, indices, data, shape, J0, tau, reverse, hbar,
               cr, ci, t0, h, nsteps):
    """Advance the block ``cr + i ci`` in place by ``nsteps`` steps of size ``h``."""
    dim, k = cr.shape
    inv_hbar = 1.0 / hbar
    k1r = np.empty_like(cr); k1i = np.empty_like(cr)
    k2r = np.empty_like(cr); k2i = np.empty_like(cr)
    k3r = np.empty_like(cr); k3i = np.empty_like(cr)
    k4r = np.empty_like(cr); k4i = np.empty_like(cr)
    tr = np.empty_like(cr); ti = np.empty_like(cr)
    for s in range(nsteps):
        t = t0 + s * h
        Ja = _drive(shape, J0, tau, reverse, t)
        Jm = _drive(shape, J0, tau, reverse, t + 0.5 * h)
        Je = _drive(shape, J0, tau, reverse, t + h)
        _sparse_rhs(diag, indptr, indices, data, Ja, inv_hbar, cr, ci, k1r, k1i)
        for i in range(dim):
            for m in range(k):
                tr[i, m] = cr[i, m] + 0.5 * h * k1r[i, m]
                ti[i, m] = ci[i, m] + 0.5 * h * k1i[i, m]
        _sparse_rhs(diag, indptr, indices, data, Jm, inv_hbar, tr, ti, k2r, k2i)
        for i in range(dim):
            for m in range(k):
                tr[i, m] = cr[i, m] + 0.5 * h * k2r[i, m]
                ti[i, m] = ci[i, m] + 0.5 * h * k2i[i, m]
        _sparse_rhs(diag, indptr, indices, data, Jm, inv_hbar, tr, ti, k3r, k3i)
        for i in range(dim):
            for m in range(k):
                tr[i, m] = cr[i, m] + h * k3r[i, m]
                ti[i, m] = ci[i, m] + h * k3i[i, m]
        _sparse_rhs(diag, indptr, indices, data, Je, inv_hbar, tr, ti, k4r, k4i)
        w = h / 6.0
        for i in range(dim):
            for m in range(k):
                cr[i, m] += w * (k1r[i, m] + 2.0 * k2r[i, m] + 2.0 * k3r[i, m] + k4r[i, m])
                ci[i, m] += w * (k1i[i, m] + 2.0 * k2i[i, m] + 2.0 * k3i[i, m] + k4i[i, m])


@njit(cache=True, nogil=True)
def _dnls_rhs(x, y, J, U, inv_hbar, nbr, kx, ky):
    # i hbar psi' = -J sum_nb psi + U |psi|^2 psi, with psi = x + i y
    L, C = x.shape
    for j in range(L):
        a = nbr[j, 0]
        b = nbr[j, 1]
        for c in range(C):
            sx = 0.0
            sy = 0.0
            if a >= 0:
                sx += x[a, c]
                sy += y[a, c]
            if b >= 0:
                sx += x[b, c]
                sy += y[b, c]
            r2 = x[j, c] * x[j, c] + y[j, c] * y[j, c]
            gr = -J * sx + U * r2 * x[j, c]
            gi = -J * sy + U * r2 * y[j, c]
            kx[j, c] = gi * inv_hbar
            ky[j, c] = -gr * inv_hbar


@njit(cache=True, nogil=True)
def _dnls_chunk(x, y, nbr, shape, J0, tau, reverse, U, hbar, t0, h, nsteps):
    L, C = x.shape
    inv_hbar = 1.0 / hbar
    k1x = np.empty_like(x); k1y = np.empty_like(x)
    k2x = np.empty_like(x); k2y = np.empty_like(x)
    k3x = np.empty_like(x); k3y = np.empty_like(x)
    k4x = np.empty_like(x); k4y = np.empty_like(x)
    tx = np.empty_like(x); ty = np.empty_like(x)
    for s in range(nsteps):
        t = t0 + s * h
        Ja = _drive(shape, J0, tau, reverse, t)
        Jm = _drive(shape, J0, tau, reverse, t + 0.5 * h)
        Je = _drive(shape, J0, tau, reverse, t + h)
        _dnls_rhs(x, y, Ja, U, inv_hbar, nbr, k1x, k1y)
        for j in range(L):
            for c in range(C):
                tx[j, c] = x[j, c] + 0.5 * h * k1x[j, c]
                ty[j, c] = y[j, c] + 0.5 * h * k1y[j, c]
        _dnls_rhs(tx, ty, Jm, U, inv_hbar, nbr, k2x, k2y)
        for j in range(L):
            for c in range(C):
                tx[j, c] = x[j, c] + 0.5 * h * k2x[j, c]
                ty[j, c] = y[j, c] + 0.5 * h * k2y[j, c]
        _dnls_rhs(tx, ty, Jm, U, inv_hbar, nbr, k3x, k3y)
        for j in range(L):
            for c in range(C):
                tx[j, c] = x[j, c] + h * k3x[j, c]
                ty[j, c] = y[j, c] + h * k3y[j, c]
        _dnls_rhs(tx, ty, Je, U, inv_hbar, nbr, k4x, k4y)
        w = h / 6.0
        for j in range(L):
            for c in range(C):
                x[j, c] += w * (k1x[j, c] + 2.0 * k2x[j, c] + 2.0 * k3x[j, c] + k4x[j, c])
                y[j, c] += w * (k1y[j, c] + 2.0 * k2y[j, c] + 2.0 * k3y[j, c] + k4y[j, c])


@njit(cache=True, nogil=True)
def rk4_dnls(x, y, nbr, shape, J0, tau, reverse, U, hbar, t0, h, nsteps):
    """Advance an ``(L, S)`` ensemble in place, ``CHUNK`` samples at a time."""
    L, S = x.shape
    for start in range(0, S, CHUNK):
        stop = min(start + CHUNK, S)
        cx = np.ascontiguousarray(x[:, start:stop])
        cy = np.ascontiguousarray(y[:, start:stop])
        _dnls_chunk(cx, cy, nbr, shape, J0, tau, reverse, U, hbar, t0, h, nsteps)
        x[:, start:stop] = cx
        y[:, start:stop] = cy
