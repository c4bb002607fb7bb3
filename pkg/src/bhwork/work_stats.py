"""Work distributions, initial-state statistics, cumulative curves and RMSE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.signal import find_peaks
from scipy.special import gammaln, logsumexp

from .classical_dynamics import classical_energy
from .distributions import TransitionDistribution
from .errors import ConfigError
from .fock import ModelParams

GROUND_STATE = "ground-state"


def _is_ground(beta) -> bool:
    return isinstance(beta, str) and beta == GROUND_STATE or (
        not isinstance(beta, str) and math.isinf(beta))


@dataclass
class InitialDistribution:
    """Probabilities over initial Fock states (indexed like the energies)."""

    probabilities: np.ndarray
    provenance: str
    beta: float | str = GROUND_STATE


@dataclass
class WorkDistribution:
    values: np.ndarray
    probabilities: np.ndarray
    provenance: str
    beta: float | str = GROUND_STATE

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))

    def mean(self) -> float:
        return float(np.dot(self.values, self.probabilities))

    def exp_average(self, beta: float) -> float:
        """``<exp(-beta W)>``, evaluated in log space."""
        p = self.probabilities
        mask = p > 0
        return float(np.exp(logsumexp(np.log(p[mask]) - beta * self.values[mask])))


# -- initial distributions -------------------------------------------------------

def gibbs_initial(energies, beta) -> InitialDistribution:
    """Boltzmann weights ``exp(-beta E_m) / Z``.

    ``beta`` may be ``"ground-state"`` (or ``inf``), which splits the weight
    equally over a degenerate lowest level.
    """
    E = np.asarray(energies, dtype=np.float64)
    if _is_ground(beta):
        scale = max(1.0, float(np.max(np.abs(E))))
        ground = np.abs(E - E.min()) <= 1e-12 * scale
        p = ground / ground.sum()
        return InitialDistribution(p.astype(np.float64), "quantum-gibbs", GROUND_STATE)
    if beta < 0:
        raise ConfigError("beta must be >= 0")
    logw = -beta * (E - E.min())
    p = np.exp(logw - logsumexp(logw))
    return InitialDistribution(p, "quantum-gibbs", float(beta))


def deterministic_initial(dim: int, index: int) -> InitialDistribution:
    p = np.zeros(dim)
    p[index] = 1.0
    return InitialDistribution(p, "deterministic", GROUND_STATE)


# -- Weyl density of states ---------------------------------------------------------

def sphere_area(dim: int, radius: float) -> float:
    """Surface area of the sphere ``S^{dim-1}`` of the given radius in ``R^dim``."""
    log_area = math.log(2.0) + 0.5 * dim * math.log(math.pi) - gammaln(0.5 * dim) \
        + (dim - 1) * math.log(radius)
    return math.exp(log_area)


def constrained_measure(L: int, N: int) -> float:
    """``(4/pi)^L * int d^Lp d^Lq delta(p^2 + q^2 - N - L/2)``.

    The shell delta contributes the sphere area divided by ``2 R``.
    """
    R = math.sqrt(N + 0.5 * L)
    return (4.0 / math.pi) ** L * sphere_area(2 * L, R) / (2.0 * R)


@dataclass
class WeylDOSEstimate:
    edges: np.ndarray
    density: np.ndarray
    std_error: np.ndarray
    samples: int
    radius: float
    total_measure: float
    J: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def integral(self) -> float:
        return float(np.sum(self.density * self.widths))

    def shifted(self, shift: float) -> "WeylDOSEstimate":
        return WeylDOSEstimate(self.edges + shift, self.density, self.std_error,
                               self.samples, self.radius, self.total_measure, self.J)


def weyl_dos_mc(params: ModelParams, J: float, energy_bins=512, samples: int = 1_000_000,
                seed: int = 0, energy_range: tuple | None = None,
                chunk: int = 200_000) -> WeylDOSEstimate:
    """Monte-Carlo histogram of the smooth density of states.

    Points are drawn uniformly on the sphere ``|q|^2 + |p|^2 = N + L/2`` in
    ``R^{2L}`` (with ``psi = q + i p``), and each carries an equal share of
    the constrained phase-space measure.  ``energy_bins`` is a bin count or
    an explicit edge array; ``energy_range`` widens the automatic range.
    """
    if samples < 1:
        raise ConfigError("samples must be positive")
    L, N = params.L, params.N
    R = math.sqrt(N + 0.5 * L)
    rng = np.random.default_rng(seed)
    energies = np.empty(samples)
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        g = rng.standard_normal((n, 2 * L))
        g *= R / np.linalg.norm(g, axis=1, keepdims=True)
        psi = g[:, :L] + 1j * g[:, L:]
        energies[start:start + n] = classical_energy(psi, J, params.U, params)
    if np.isscalar(energy_bins) or np.ndim(energy_bins) == 0:
        lo, hi = float(energies.min()), float(energies.max())
        if energy_range is not None:
            lo, hi = min(lo, energy_range[0]), max(hi, energy_range[1])
        pad = 1e-9 * max(1.0, abs(lo), abs(hi))
        nb = int(energy_bins)
        if hi - lo <= pad:
            # constant energy (up to rounding): centre one bin on it
            mid = 0.5 * (lo + hi)
            edges = mid + pad * (np.linspace(-1.0, 1.0, nb + 1) + 1.0 / nb)
        else:
            edges = np.linspace(lo - pad, hi + pad, nb + 1)
    else:
        edges = np.asarray(energy_bins, dtype=np.float64)
    counts, _ = np.histogram(energies, bins=edges)
    measure = constrained_measure(L, N)
    share = measure / samples
    widths = np.diff(edges)
    density = counts * share / widths
    err = np.sqrt(counts * (1.0 - counts / samples)) * share / widths
    return WeylDOSEstimate(edges, density, err, samples, R, measure, float(J))


def _window_integrals(weyl: WeylDOSEstimate, lows, highs, beta, ref):
    edges = weyl.edges
    out = np.zeros(len(lows))
    for k, (lo, hi) in enumerate(zip(lows, highs)):
        if hi <= lo:
            continue
        a = np.clip(edges[:-1], lo, hi)
        b = np.clip(edges[1:], lo, hi)
        w = b - a
        if beta == 0:
            piece = w
        else:
            piece = np.exp(-beta * (a - ref)) * (-np.expm1(-beta * w)) / beta
        out[k] = float(np.sum(weyl.density * piece))
    return out


def classical_initial(weyl: WeylDOSEstimate, energies, beta,
                      energy_shift: float = 0.0) -> InitialDistribution:
    """Classical weight of each level: ``int rho(E) exp(-beta E) dE`` up to the next level.

    Levels are sorted ascending; degenerate duplicates get a zero-width window.
    The last level integrates to the top of the density's support.
    ``energy_shift`` is added to the density's energy axis before integrating.
    """
    E = np.asarray(energies, dtype=np.float64)
    dos = weyl.shifted(energy_shift) if energy_shift else weyl
    order = np.argsort(E, kind="stable")
    Es = E[order]
    if dos.edges[0] > Es[0] + 1e-12 * max(1.0, abs(Es[0])) or dos.edges[-1] < Es[-1]:
        raise ConfigError(f"DOS grid [{dos.edges[0]:.6g}, {dos.edges[-1]:.6g}] does not cover "
                          f"the spectrum [{Es[0]:.6g}, {Es[-1]:.6g}]")
    highs = np.append(Es[1:], dos.edges[-1])
    if _is_ground(beta):
        # all weight on the window holding the lowest occupied energy
        support = dos.edges[:-1][dos.density > 0]
        w = np.zeros(len(Es))
        if support.size:
            k = int(np.searchsorted(highs, support[0], side="right"))
            w[min(k, len(Es) - 1)] = 1.0
        beta_label = GROUND_STATE
    else:
        if beta < 0:
            raise ConfigError("beta must be >= 0")
        w = _window_integrals(dos, Es, highs, float(beta), Es[0])
        beta_label = float(beta)
    total = w.sum()
    if total <= 0:
        raise ConfigError("density of states has no weight inside the spectrum windows")
    p = np.zeros(len(E))
    p[order] = w / total
    return InitialDistribution(p, "classical-weyl", beta_label)


def ordering_shift(params: ModelParams) -> float:
    """Constant offset between ``U/2 n(n-1)`` and ``U/2 (n + 1/2)^2`` on the fixed-N sector."""
    return -params.U * (params.N + params.L / 8.0)


# -- work distributions ---------------------------------------------------------------

def assemble_work_distribution(initial: InitialDistribution, transitions, energies_A,
                               energies_B, provenance: str = "quantum") -> WorkDistribution:
    """Accumulate ``P(n|m) P(m)`` onto ``W = E_n^B - E_m^A``.

    ``transitions`` is a mapping ``m -> TransitionDistribution`` (or an
    array row) or a matrix ``P[n, m]``.  Work values closer than
    ``1e-9 * max|E|`` are merged.
    """
    EA = np.asarray(energies_A, dtype=np.float64)
    EB = np.asarray(energies_B, dtype=np.float64)
    pm = np.asarray(initial.probabilities)
    Ws, ps = [], []
    for m in np.flatnonzero(pm > 0):
        row = _row(transitions, int(m))
        Ws.append(EB - EA[m])
        ps.append(row * pm[m])
    if not Ws:
        raise ConfigError("initial distribution has no weight")
    W = np.concatenate(Ws)
    P = np.concatenate(ps)
    order = np.argsort(W, kind="stable")
    W, P = W[order], P[order]
    tol = 1e-9 * max(float(np.max(np.abs(EA))), float(np.max(np.abs(EB))), 1e-300)
    new_group = np.concatenate([[True], np.diff(W) > tol])
    gid = np.cumsum(new_group) - 1
    probs = np.bincount(gid, weights=P)
    values = W[new_group]
    return WorkDistribution(values, probs, provenance, initial.beta)


def _row(transitions, m: int) -> np.ndarray:
    if isinstance(transitions, Mapping):
        if m not in transitions:
            raise ConfigError(f"missing transition row for initial state {m}")
        row = transitions[m]
    else:
        row = np.asarray(transitions)[:, m]
    if isinstance(row, TransitionDistribution):
        return np.asarray(row.probabilities, dtype=np.float64)
    return np.asarray(row, dtype=np.float64)


def mean_work_from_transitions(initial: InitialDistribution, transitions, energies_A,
                               energies_B) -> float:
    """``sum_m P(m) [sum_n P(n|m) E_n^B - E_m^A]``."""
    EA = np.asarray(energies_A, dtype=np.float64)
    EB = np.asarray(energies_B, dtype=np.float64)
    total = 0.0
    for m in np.flatnonzero(np.asarray(initial.probabilities) > 0):
        row = _row(transitions, int(m))
        total += initial.probabilities[m] * (np.dot(row, EB) - EA[m] * row.sum())
    return float(total)


# -- cumulative curves and RMSE ---------------------------------------------------------

def cumulative(dist) -> np.ndarray:
    """Running sum ``S_l`` in ascending lexicographic final-state order.

    For two sites entry ``l`` is the probability of ``n_1^B <= l``.  Plain
    arrays are summed in the order given.
    """
    if isinstance(dist, TransitionDistribution):
        return np.cumsum(dist.by_n1())
    return np.cumsum(np.asarray(dist, dtype=np.float64))


def rmse(SQ, SC) -> float:
    SQ = np.asarray(SQ, dtype=np.float64)
    SC = np.asarray(SC, dtype=np.float64)
    if SQ.shape != SC.shape:
        raise ValueError(f"length mismatch: {SQ.shape} vs {SC.shape}")
    return float(np.sqrt(np.mean((SQ - SC) ** 2)))


def transition_rmse(quantum: TransitionDistribution, classical: TransitionDistribution) -> float:
    return rmse(cumulative(quantum), cumulative(classical))


def oscillation_period(curve) -> float:
    """Median spacing between consecutive local maxima, in bins."""
    peaks = find_peaks(np.asarray(curve, dtype=np.float64))[0]
    return float(np.median(np.diff(peaks))) if peaks.size > 1 else 1.0


def envelope_coverage(quantum, classical, margin: int = 2, distance: float | None = None):
    """Fraction of interior bins where the classical curve lies between the
    lower and upper envelopes of the quantum curve.

    Envelopes interpolate linearly through the quantum curve's peaks and
    troughs, keeping only extrema at least ``distance`` bins apart (the
    highest peaks and deepest troughs win).  By default ``distance`` is the
    curve's own oscillation period, so shallow wiggles inside one period do
    not pin the envelope; ``distance=1`` keeps every local extremum.  The end
    bins anchor both envelopes.  Interior bins are those inside the classical
    support, ``margin`` bins away from either end.  Returns ``(fraction, mask)``.
    """
    q = quantum.by_n1() if isinstance(quantum, TransitionDistribution) else np.asarray(quantum)
    c = classical.by_n1() if isinstance(classical, TransitionDistribution) else np.asarray(classical)
    q = np.asarray(q, dtype=np.float64)
    if distance is None:
        distance = oscillation_period(q)
    distance = max(float(distance), 1.0)
    idx = np.arange(q.size)
    ends = [0, q.size - 1]
    maxima = np.unique(np.concatenate([ends, find_peaks(q, distance=distance)[0]]))
    minima = np.unique(np.concatenate([ends, find_peaks(-q, distance=distance)[0]]))
    upper = np.interp(idx, maxima, q[maxima])
    lower = np.interp(idx, minima, q[minima])
    support = np.flatnonzero(c > 0)
    if support.size == 0:
        return 1.0, np.zeros(q.size, dtype=bool)
    mask = np.zeros(q.size, dtype=bool)
    mask[support[0] + margin: support[-1] - margin + 1] = True
    ok = (c >= lower) & (c <= upper)
    if not mask.any():
        return 1.0, mask
    return float(np.mean(ok[mask])), mask
