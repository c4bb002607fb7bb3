"""Mean-field (discrete nonlinear Schroedinger) dynamics of the amplitudes ``psi_j``."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, ConvergenceError
from .fock import ModelParams
from .protocol import DriveProtocol, IntegratorConfig

log = logging.getLogger(__name__)

PHASE_POLICIES = ("all-random", "first-fixed-zero")


@dataclass
class ClassicalField:
    amplitudes: np.ndarray
    time: float = 0.0

    @property
    def total_norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class ClassicalInitialEnsemble:
    """Fixed actions ``|psi_j|^2 = n_j + 1/2`` with uniformly random phases."""

    occupations: tuple
    sample_count: int = 100_000
    master_seed: int = 0
    phase_policy: str = "all-random"

    def __post_init__(self):
        object.__setattr__(self, "occupations", tuple(int(n) for n in self.occupations))
        if any(n < 0 for n in self.occupations):
            raise ConfigError("occupations must be non-negative")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be >= 1")
        if self.phase_policy not in PHASE_POLICIES:
            raise ConfigError(f"unknown phase policy {self.phase_policy!r}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must fit in 64 bits")

    @property
    def L(self) -> int:
        return len(self.occupations)

    @property
    def N(self) -> int:
        return sum(self.occupations)


def classical_energy(field: ClassicalField | np.ndarray, J: float, U: float,
                     params: ModelParams | None = None):
    """Mean-field energy; ``field`` may also be an ``(..., L)`` array of amplitudes.

    ``params`` only supplies the boundary condition; by default it follows
    the experiments' convention (open for two sites, ring otherwise).
    """
    psi = field.amplitudes if isinstance(field, ClassicalField) else np.asarray(field)
    L = psi.shape[-1]
    if params is None:
        params = ModelParams(L=L, N=1, U=U)
    hop = np.zeros(psi.shape[:-1])
    for a, b in params.bonds():
        hop = hop + 2.0 * np.real(np.conj(psi[..., a]) * psi[..., b])
    n2 = np.abs(psi) ** 2
    return -J * hop + 0.5 * U * np.sum(n2 * n2, axis=-1)


# -- phase sampling -----------------------------------------------------------

def _words_per_sample(L: int) -> int:
    return 4 * ((L + 3) // 4)


def sample_phases(ensemble: ClassicalInitialEnsemble, start: int = 0,
                  count: int | None = None) -> np.ndarray:
    """Phases of samples ``start .. start+count-1``, shape ``(count, L)``.

    Sample ``k`` always reads the Philox block(s) at counter ``k * ceil(L/4)``
    under key ``master_seed``, so any sample can be regenerated on its own.
    """
    if count is None:
        count = ensemble.sample_count - start
    L = ensemble.L
    blocks = (L + 3) // 4
    bitgen = np.random.Philox(key=ensemble.master_seed, counter=start * blocks)
    raw = bitgen.random_raw(count * _words_per_sample(L)).reshape(count, -1)[:, :L]
    u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    phases = 2.0 * np.pi * u
    if ensemble.phase_policy == "first-fixed-zero":
        phases[:, 0] = 0.0
    return phases


def initial_amplitudes(ensemble: ClassicalInitialEnsemble, start: int = 0,
                       count: int | None = None) -> np.ndarray:
    radius = np.sqrt(np.asarray(ensemble.occupations, dtype=np.float64) + 0.5)
    return radius * np.exp(1j * sample_phases(ensemble, start, count))


def sample_initial_ensemble(ensemble: ClassicalInitialEnsemble,
                            chunk: int = 4096) -> Iterator[ClassicalField]:
    for start in range(0, ensemble.sample_count, chunk):
        count = min(chunk, ensemble.sample_count - start)
        for psi in initial_amplitudes(ensemble, start, count):
            yield ClassicalField(psi)


# -- integration --------------------------------------------------------------

def _run(psi: np.ndarray, protocol: DriveProtocol, params: ModelParams,
         nsteps: int, t0: float = 0.0, t1: float | None = None) -> np.ndarray:
    """Fixed-step RK4 on an ``(S, L)`` batch from ``t0`` to ``t1``."""
    if t1 is None:
        t1 = protocol.tau
    x = np.ascontiguousarray(psi.real.T, dtype=np.float64)
    y = np.ascontiguousarray(psi.imag.T, dtype=np.float64)
    if nsteps > 0:
        _kernels.rk4_dnls(x, y, params.neighbours(), protocol.shape_code,
                          float(protocol.J0), float(protocol.tau), bool(protocol.reverse),
                          float(params.U), float(params.hbar),
                          float(t0), (t1 - t0) / nsteps, int(nsteps))
    return (x + 1j * y).T


def _drift(psi0: np.ndarray, psi1: np.ndarray) -> float:
    n0 = np.sum(np.abs(psi0) ** 2, axis=-1)
    n1 = np.sum(np.abs(psi1) ** 2, axis=-1)
    with np.errstate(invalid="ignore"):
        return float(np.max(np.abs(n1 - n0) / n0))


def _converge(psi0: np.ndarray, protocol, params, cfg, steps_iter):
    tol = cfg.norm_tolerance
    prev = None
    drift = change = np.inf
    steps = 0
    for steps in steps_iter:
        cur = _run(psi0, protocol, params, steps)
        drift = _drift(psi0, cur)
        if prev is not None:
            with np.errstate(invalid="ignore"):
                change = float(np.max(np.abs(cur - prev)))
        log.debug("dnls rk4 steps=%d drift=%.3e change=%.3e", steps, drift, change)
        if prev is not None and drift < tol and change < 10 * tol:
            return cur, steps, drift
        prev = cur
    raise ConvergenceError(
        f"classical integration not converged after {cfg.max_refinements} refinements "
        f"({steps} steps): drift={drift:.3e}, change={change:.3e}",
        drift=drift, change=change, steps=steps)


def evolve_classical(initial: ClassicalField, protocol: DriveProtocol, params: ModelParams,
                     cfg: IntegratorConfig = IntegratorConfig()) -> ClassicalField:
    psi0 = np.asarray(initial.amplitudes, dtype=np.complex128)[None, :]
    if psi0.shape[1] != params.L:
        raise ConfigError(f"field has {psi0.shape[1]} sites, model has {params.L}")
    final, _, _ = _converge(psi0, protocol, params, cfg, cfg.step_counts())
    return ClassicalField(final[0], initial.time + protocol.tau)


def evolve_ensemble(psi0: np.ndarray, protocol: DriveProtocol, params: ModelParams,
                    cfg: IntegratorConfig = IntegratorConfig()):
    """Evolve an ``(S, L)`` batch of amplitudes to ``t = tau``.

    The step count is chosen by step doubling on the first
    ``cfg.pilot_samples`` members; the whole batch is then run at that count
    and the norm drift re-checked on every member, doubling further if any
    member fails.  Returns ``(final, steps, max_relative_drift)``.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.ndim != 2 or psi0.shape[1] != params.L:
        raise ConfigError(f"expected (samples, {params.L}) amplitudes, got {psi0.shape}")
    pilot = psi0[: cfg.pilot_samples]
    _, steps, _ = _converge(pilot, protocol, params, cfg, cfg.step_counts())
    if psi0.shape[0] <= pilot.shape[0]:
        final = _run(psi0, protocol, params, steps)
        return final, steps, _drift(psi0, final)
    limit = cfg.base_steps << cfg.max_refinements
    while True:
        final = _run(psi0, protocol, params, steps)
        drift = _drift(psi0, final)
        if drift < cfg.norm_tolerance:
            return final, steps, drift
        if steps >= limit:
            raise ConvergenceError(f"ensemble norm drift {drift:.3e} at {steps} steps",
                                   drift=drift, steps=steps)
        steps *= 2


def trajectory(initial: ClassicalField | np.ndarray, protocol: DriveProtocol,
               params: ModelParams, times: Sequence[float], steps: int) -> np.ndarray:
    """Amplitudes at each of ``times`` (ascending, within ``[0, tau]``).

    Integrates with the fixed step ``tau / steps``, stopping exactly on each
    output time.  Accepts a single field or an ``(S, L)`` batch; the result
    has shape ``(len(times), S, L)``.
    """
    psi = initial.amplitudes if isinstance(initial, ClassicalField) else np.asarray(initial)
    psi = np.atleast_2d(np.asarray(psi, dtype=np.complex128))
    h = protocol.tau / steps
    out = []
    t_prev = 0.0
    for t in times:
        if t < t_prev or t > protocol.tau + 1e-12:
            raise ConfigError("output times must be ascending within [0, tau]")
        n = max(int(round((t - t_prev) / h)), 1) if t > t_prev else 0
        psi = _run(psi, protocol, params, n, t_prev, t)
        out.append(psi.copy())
        t_prev = t
    return np.array(out)
