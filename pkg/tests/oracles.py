"""Reference implementations that share no code with the package.

Each oracle is deliberately naive: dense tensor products, explicit matrix
exponentials, closed forms.  They are only fit for small systems.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import expm


# -- operators ---------------------------------------------------------------------

def fock_states(L, N):
    """All occupation tuples with sum N, in descending lexicographic order."""
    states = [s for s in itertools.product(range(N, -1, -1), repeat=L) if sum(s) == N]
    return states


def brute_force_hamiltonian(L, N, U, J, periodic):
    """Fixed-N block of ``-J sum (a_j^+ a_k + h.c.) + U/2 sum n(n-1)``.

    Built from truncated ladder matrices on the full ``(N+1)^L`` product
    space, then projected onto the states returned by :func:`fock_states`.
    """
    d = N + 1
    a1 = np.diag(np.sqrt(np.arange(1, d)), k=1)
    eye = np.eye(d)

    def site_op(op, j):
        mats = [op if k == j else eye for k in range(L)]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    a = [site_op(a1, j) for j in range(L)]
    n = [x.T @ x for x in a]
    H = sum(0.5 * U * nj @ (nj - np.eye(d ** L)) for nj in n)
    bonds = [(j, j + 1) for j in range(L - 1)]
    if periodic and L >= 3:
        bonds.append((L - 1, 0))
    for j, k in bonds:
        H = H - J * (a[j].T @ a[k] + a[k].T @ a[j])
    states = fock_states(L, N)
    flat = [int(np.ravel_multi_index(s, (d,) * L)) for s in states]
    return H[np.ix_(flat, flat)], states


# -- time evolution ------------------------------------------------------------------

def sliced_propagator(H0, K, Jfun, tau, slices=1000, hbar=1.0):
    """``U(tau)`` for ``H(t) = H0 - J(t) K`` with ``J`` frozen at each slice midpoint."""
    dt = tau / slices
    Uprop = np.eye(H0.shape[0], dtype=complex)
    for k in range(slices):
        Jm = Jfun((k + 0.5) * dt)
        Uprop = expm(-1j * dt / hbar * (H0 - Jm * K)) @ Uprop
    return Uprop


def magnus4_propagator(H0, K, Jfun, tau, slices=1000, hbar=1.0):
    """Fourth-order Magnus propagator with two Gauss-Legendre nodes per slice."""
    dt = tau / slices
    c = math.sqrt(3.0) / 6.0
    t0 = np.arange(slices) * dt
    J1 = np.asarray(Jfun(t0 + (0.5 - c) * dt), dtype=float)[:, None, None]
    J2 = np.asarray(Jfun(t0 + (0.5 + c) * dt), dtype=float)[:, None, None]
    A1 = -1j / hbar * (H0[None] - J1 * K[None])
    A2 = -1j / hbar * (H0[None] - J2 * K[None])
    omega = 0.5 * dt * (A1 + A2) + (math.sqrt(3.0) / 12.0) * dt * dt * (A2 @ A1 - A1 @ A2)
    steps = expm(omega)
    Uprop = np.eye(H0.shape[0], dtype=complex)
    for E in steps:
        Uprop = E @ Uprop
    return Uprop


def parabolic(J0, tau):
    return lambda t: J0 * (t - t * t / tau)


# -- non-interacting two-site system --------------------------------------------------------

def single_particle_two_site(theta):
    """One-body propagator ``exp(i theta sigma_x)`` for hopping ``-J sigma_x``."""
    return np.array([[math.cos(theta), 1j * math.sin(theta)],
                     [1j * math.sin(theta), math.cos(theta)]])


def lifted_amplitudes(u, n1, n2):
    """Amplitudes ``<m1, N-m1| U_N |n1, n2>`` for bosons under one-body ``u``.

    Expands ``(u00 x + u10 y)^n1 (u01 x + u11 y)^n2`` as a polynomial in the
    creation operators ``x = a_1^+`` and ``y = a_2^+``.
    """
    N = n1 + n2
    # coefficient arrays indexed by the power of x
    p = np.array([1.0 + 0j])
    col0 = np.array([u[1, 0], u[0, 0]])   # powers x^0, x^1
    col1 = np.array([u[1, 1], u[0, 1]])
    for _ in range(n1):
        p = np.convolve(p, col0)
    for _ in range(n2):
        p = np.convolve(p, col1)
    norm_in = math.sqrt(math.factorial(n1) * math.factorial(n2))
    out = np.zeros(N + 1, dtype=complex)
    for m1 in range(N + 1):
        out[m1] = p[m1] * math.sqrt(math.factorial(m1) * math.factorial(N - m1)) / norm_in
    return out


# -- classical linear dynamics ------------------------------------------------------------

def beam_splitter_action(a, b, theta, phi):
    """``|psi_1(tau)|^2`` for ``psi(0) = (a, b e^{i phi})`` under the linear two-mode map."""
    c, s = math.cos(theta), math.sin(theta)
    return a * a * c * c + b * b * s * s - 2.0 * a * b * c * s * np.sin(phi)


def beam_splitter_cdf(a, b, theta, v):
    """Fraction of uniform phases with ``|psi_1(tau)|^2 < v``."""
    c, s = math.cos(theta), math.sin(theta)
    A = a * a * c * c + b * b * s * s
    B = 2.0 * a * b * c * s
    if B == 0:
        return np.where(np.asarray(v) > A, 1.0, 0.0)
    x = np.clip((A - np.asarray(v, dtype=float)) / B, -1.0, 1.0)
    # action < v  <=>  B sin(phi) > A - v
    if B > 0:
        return 0.5 - np.arcsin(x) / math.pi
    return 0.5 + np.arcsin(x) / math.pi


def beam_splitter_roots(a, b, theta, level):
    """Relative phases in ``[0, 2 pi)`` where the action equals ``level``."""
    c, s = math.cos(theta), math.sin(theta)
    A = a * a * c * c + b * b * s * s
    B = 2.0 * a * b * c * s
    x = (A - level) / B
    if abs(x) > 1:
        return np.array([])
    r = math.asin(x)
    return np.sort(np.mod([r, math.pi - r], 2 * math.pi))


def ring_propagator(L, theta):
    """Linear map ``exp(i theta A)`` for the ring adjacency matrix ``A``."""
    A = np.zeros((L, L))
    for j in range(L):
        k = (j + 1) % L
        A[j, k] = A[k, j] = 1.0
    return expm(1j * theta * A)


# -- phase-space measures -------------------------------------------------------------

def sphere_area_closed_form(L, R):
    """Area of ``S^{2L-1}`` of radius ``R``: ``2 pi^L R^{2L-1} / (L-1)!``."""
    return 2.0 * math.pi ** L * R ** (2 * L - 1) / math.factorial(L - 1)


def two_site_j0_bin_mass(U, total, lo, hi):
    """Fraction of the ``S^3`` shell with ``U/2 (n^2 + (total-n)^2)`` in ``[lo, hi)``.

    On that shell ``n = |psi_1|^2`` is uniform on ``[0, total]``.
    """
    Emin = 0.25 * U * total * total
    half = 0.5 * total

    def below(E):
        # measure of n with energy < E
        if E <= Emin:
            return 0.0
        d = math.sqrt(max(0.0, (E - Emin) / U))
        return min(2.0 * d, total) if d < half else total

    return (below(hi) - below(lo)) / total
