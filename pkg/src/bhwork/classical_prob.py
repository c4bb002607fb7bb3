"""Classical transition probabilities between Fock states.

Two independent routes:

* Monte Carlo: evolve the random-phase ensemble and bin the final actions
  ``|psi_j(tau)|^2`` into unit cells ``[n_j, n_j + 1)`` for ``j >= 2``.
* Shooting: find every initial phase whose trajectory ends exactly on
  ``|psi_j(tau)|^2 = n_j^B + 1/2`` and weight it by the inverse Jacobian of
  the phase -> final-action map.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import minimize_scalar

from .classical_dynamics import (ClassicalInitialEnsemble, _run, evolve_ensemble,
                                 initial_amplitudes)
from .distributions import TransitionDistribution
from .errors import ConfigError
from .fock import FockBasis, ModelParams, build_basis
from .protocol import DriveProtocol, IntegratorConfig

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
CAUSTIC_THRESHOLD = 1e-12
LEAKAGE_WARNING = 0.01
STALL_WINDOW = 10


@dataclass(frozen=True)
class ShootingConfig:
    """Grid and root-finding settings.

    ``scan_resolution`` is the number of grid points per phase dimension;
    ``None`` means 4096 for two sites and 256 for three.
    """

    scan_resolution: int | None = None
    root_tolerance: float = 1e-9
    fd_step: float = 1e-6
    max_newton_iters: int = 50
    dedup_factor: float = 10.0

    def __post_init__(self):
        if self.scan_resolution is not None and self.scan_resolution < 4:
            raise ConfigError("scan_resolution must be >= 4")
        for name in ("root_tolerance", "fd_step", "max_newton_iters", "dedup_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def resolution(self, L: int) -> int:
        if self.scan_resolution is not None:
            return self.scan_resolution
        return 4096 if L == 2 else 256

    @property
    def dedup_distance(self) -> float:
        return self.dedup_factor * self.fd_step


@dataclass
class Trajectory:
    """One root of the shooting problem.

    ``phases`` are the free initial phases (site 1 is pinned to zero);
    ``jacobian`` is ``d|psi_2(tau)|^2/d phi_2`` for two sites (sign kept) and
    the 2x2 determinant for three sites.
    """

    target: tuple
    phases: np.ndarray
    jacobian: float
    weight: float
    caustic: bool = False


# -- Monte Carlo ----------------------------------------------------------------

def bin_final_fields(psi: np.ndarray, basis: FockBasis):
    """Map final amplitudes ``(S, L)`` to basis indices; ``-1`` marks leakage."""
    N = basis.params.N
    S, L = psi.shape
    if L == 1:
        return np.zeros(S, dtype=np.int64)
    labels = np.floor(np.abs(psi[:, 1:]) ** 2).astype(np.int64)
    n1 = N - labels.sum(axis=1)
    ok = np.all((labels >= 0) & (labels <= N), axis=1) & (n1 >= 0)
    idx = np.full(S, -1, dtype=np.int64)
    if not ok.any():
        return idx
    occ = np.column_stack([n1[ok], labels[ok]])
    uniq, inv = np.unique(occ, axis=0, return_inverse=True)
    lookup = np.array([basis.index_of[tuple(int(v) for v in row)] for row in uniq])
    idx[ok] = lookup[np.ravel(inv)]
    return idx


def classical_transition_mc(ensemble: ClassicalInitialEnsemble, protocol: DriveProtocol,
                            params: ModelParams, cfg: IntegratorConfig = IntegratorConfig(),
                            basis: FockBasis | None = None,
                            batch: int = 50_000, threads: int = 1) -> TransitionDistribution:
    """Bin the evolved phase ensemble into Fock cells.

    Batches of ``batch`` samples are independent work items; with
    ``threads > 1`` they run concurrently and are reduced in batch order,
    so the result does not depend on the thread count.
    """
    if ensemble.L != params.L or ensemble.N != params.N:
        raise ConfigError(f"ensemble occupations {ensemble.occupations} do not match "
                          f"L={params.L}, N={params.N}")
    if basis is None:
        basis = build_basis(params)
    S = ensemble.sample_count

    def work(start):
        psi0 = initial_amplitudes(ensemble, start, min(batch, S - start))
        final, steps, _ = evolve_ensemble(psi0, protocol, params, cfg)
        idx = bin_final_fields(final, basis)
        return steps, int(np.sum(idx < 0)), np.bincount(idx[idx >= 0], minlength=basis.dim)

    starts = range(0, S, batch)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    counts = np.zeros(basis.dim, dtype=np.int64)
    leaked = 0
    steps_used = []
    for steps, lost, c in parts:
        steps_used.append(steps)
        leaked += lost
        counts += c
    p = counts / S
    dist = TransitionDistribution(
        basis=basis, initial_state=ensemble.occupations, probabilities=p,
        provenance="classical-mc", count=S,
        statistical_error=np.sqrt(p * (1.0 - p) / S), leakage=leaked / S)
    if dist.leakage > LEAKAGE_WARNING:
        dist.warnings.append(f"leakage fraction {dist.leakage:.4f} exceeds {LEAKAGE_WARNING}")
    log.info("classical MC: %d samples, steps %s, leakage %.2e", S, steps_used, dist.leakage)
    return dist


# -- shooting, two sites ----------------------------------------------------------

class TwoSiteShooter:
    """Scans ``phi -> |psi_1(tau)|^2`` on a grid and solves for its level sets.

    Site 1 starts with phase 0 and site 2 with phase ``phi``.  The step
    count is fixed once, from step doubling on the scan batch, so every
    evaluation sees the same smooth map.
    """

    def __init__(self, initial_n, protocol: DriveProtocol, params: ModelParams,
                 shoot: ShootingConfig = ShootingConfig(),
                 cfg: IntegratorConfig = IntegratorConfig()):
        if params.L != 2:
            raise ConfigError("two-site shooting needs L = 2")
        if len(initial_n) != 2 or sum(initial_n) != params.N:
            raise ConfigError(f"initial state {initial_n} not in the N={params.N} basis")
        self.initial_n = tuple(int(n) for n in initial_n)
        self.protocol = protocol
        self.params = params
        self.shoot = shoot
        self.radius = np.sqrt(np.asarray(self.initial_n, dtype=np.float64) + 0.5)
        self.evaluations = 0
        res = shoot.resolution(2)
        grid = TWO_PI * np.arange(res) / res
        final, self.steps, _ = evolve_ensemble(self._psi0(grid), protocol, params, cfg)
        values = np.abs(final[:, 0]) ** 2
        self.evaluations += res
        self.grid, self.values = self._add_extrema(grid, values)

    def _psi0(self, phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
        psi = np.empty((phi.size, 2), dtype=np.complex128)
        psi[:, 0] = self.radius[0]
        psi[:, 1] = self.radius[1] * np.exp(1j * phi)
        return psi

    def final_action(self, phi) -> np.ndarray:
        """``|psi_1(tau)|^2`` for each initial phase in ``phi``."""
        psi = _run(self._psi0(phi), self.protocol, self.params, self.steps)
        self.evaluations += psi.shape[0]
        return np.abs(psi[:, 0]) ** 2

    def _add_extrema(self, grid, values):
        # refine local extrema so level sets near turning points are not missed
        prev = np.roll(values, 1)
        nxt = np.roll(values, -1)
        extra_phi, extra_val = [], []
        h = grid[1] - grid[0]
        for k in np.flatnonzero(((values >= prev) & (values >= nxt)) |
                                ((values <= prev) & (values <= nxt))):
            sign = -1.0 if values[k] >= prev[k] else 1.0
            res = minimize_scalar(lambda p: sign * self.final_action(p)[0],
                                  bounds=(grid[k] - h, grid[k] + h), method="bounded",
                                  options={"xatol": 1e-10})
            extra_phi.append(res.x % TWO_PI)
            extra_val.append(sign * res.fun)
        phi = np.concatenate([grid, extra_phi])
        val = np.concatenate([values, extra_val])
        order = np.argsort(phi, kind="stable")
        return phi[order], val[order]

    def _brackets(self, level: float):
        g = self.values - level
        phi_next = np.append(self.grid[1:], self.grid[0] + TWO_PI)
        g_next = np.roll(g, -1)
        hit = np.sign(g) * np.sign(g_next) < 0
        exact = g == 0.0
        return (self.grid[hit], phi_next[hit], g[hit] < 0), (self.grid[exact], g_next[exact] > 0)

    def roots(self, level: float):
        """Phases where ``|psi_1(tau)|^2 = level``, with up-crossing flags."""
        (lo, hi, rising), (exact, exact_up) = self._brackets(level)
        tol = self.shoot.root_tolerance
        lo = lo.copy()
        hi = hi.copy()
        done = np.zeros(lo.size, dtype=bool)
        mid = 0.5 * (lo + hi)
        for _ in range(200):
            active = ~done
            if not active.any():
                break
            mid[active] = 0.5 * (lo[active] + hi[active])
            f = self.final_action(mid[active] % TWO_PI) - level
            idx = np.flatnonzero(active)
            conv = (np.abs(f) < tol) | (hi[idx] - lo[idx] < 1e-15)
            done[idx[conv]] = True
            below = f < 0
            # f < 0 on the rising side means the root lies above mid
            go_up = below == rising[idx]
            lo[idx[go_up & ~conv]] = mid[idx[go_up & ~conv]]
            hi[idx[~go_up & ~conv]] = mid[idx[~go_up & ~conv]]
        phis = np.concatenate([mid % TWO_PI, exact])
        ups = np.concatenate([rising, exact_up])
        order = np.argsort(phis)
        return self._dedup(phis[order], ups[order])

    def _dedup(self, phis, ups):
        if phis.size < 2:
            return phis, ups
        keep = [0]
        for k in range(1, phis.size):
            if phis[k] - phis[keep[-1]] > self.shoot.dedup_distance:
                keep.append(k)
        if len(keep) > 1 and phis[keep[0]] + TWO_PI - phis[keep[-1]] <= self.shoot.dedup_distance:
            keep.pop()
        keep = np.asarray(keep)
        return phis[keep], ups[keep]

    def derivative(self, phis) -> np.ndarray:
        d = self.shoot.fd_step
        phis = np.asarray(phis, dtype=np.float64)
        if phis.size == 0:
            return phis.copy()
        vals = self.final_action(np.concatenate([phis + d, phis - d]))
        return (vals[: phis.size] - vals[phis.size:]) / (2 * d)

    def trajectories(self, final_n1B: int) -> list[Trajectory]:
        level = final_n1B + 0.5
        phis, _ = self.roots(level)
        deriv = self.derivative(phis)
        out = []
        for phi, fp in zip(phis, deriv):
            caustic = abs(fp) < CAUSTIC_THRESHOLD
            weight = 0.0 if caustic else 1.0 / (TWO_PI * abs(fp))
            out.append(Trajectory((int(final_n1B), self.params.N - int(final_n1B)),
                                  np.array([phi]), float(fp), weight, caustic))
        if any(t.caustic for t in out):
            log.warning("caustic trajectory excluded at n1B=%d", final_n1B)
        return out

    def measure_above(self, level: float) -> float:
        """Lebesgue measure of ``{phi : |psi_1(tau)|^2 >= level}``."""
        phis, ups = self.roots(level)
        if phis.size == 0:
            return TWO_PI if np.all(self.values >= level) else 0.0
        total = 0.0
        for k in range(phis.size):
            if ups[k]:
                nxt = phis[(k + 1) % phis.size] + (TWO_PI if k + 1 == phis.size else 0.0)
                total += nxt - phis[k]
        return total

    def bin_probabilities(self) -> np.ndarray:
        """Probability of ``|psi_1(tau)|^2 in [n, n+1)`` for ``n = 0..N``."""
        N = self.params.N
        above = np.array([self.measure_above(float(a)) for a in range(N + 2)])
        return (above[:-1] - above[1:]) / TWO_PI


def shoot_trajectories_two_site(initial_n, final_n1B: int, protocol: DriveProtocol,
                                params: ModelParams, shoot: ShootingConfig = ShootingConfig(),
                                cfg: IntegratorConfig = IntegratorConfig()) -> list[Trajectory]:
    return TwoSiteShooter(initial_n, protocol, params, shoot, cfg).trajectories(final_n1B)


# -- shooting, three sites --------------------------------------------------------

class ThreeSiteShooter:
    """Multi-start Newton search on ``(phi_2, phi_3) -> (|psi_2|^2, |psi_3|^2)``.

    Starts are the centres of scan cells whose corner values bracket the
    target in both components.  Completeness is not guaranteed.
    """

    def __init__(self, initial_n, protocol: DriveProtocol, params: ModelParams,
                 shoot: ShootingConfig = ShootingConfig(),
                 cfg: IntegratorConfig = IntegratorConfig()):
        if params.L != 3:
            raise ConfigError("three-site shooting needs L = 3")
        if len(initial_n) != 3 or sum(initial_n) != params.N:
            raise ConfigError(f"initial state {initial_n} not in the N={params.N} basis")
        self.initial_n = tuple(int(n) for n in initial_n)
        self.protocol = protocol
        self.params = params
        self.shoot = shoot
        self.radius = np.sqrt(np.asarray(self.initial_n, dtype=np.float64) + 0.5)
        res = shoot.resolution(3)
        self.res = res
        g = TWO_PI * np.arange(res) / res
        P2, P3 = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([P2.ravel(), P3.ravel()])
        final, self.steps, _ = evolve_ensemble(self._psi0(pts), protocol, params, cfg)
        act = np.abs(final[:, 1:]) ** 2
        self.X2 = act[:, 0].reshape(res, res)
        self.X3 = act[:, 1].reshape(res, res)

    def _psi0(self, phis):
        phis = np.atleast_2d(phis)
        psi = np.empty((phis.shape[0], 3), dtype=np.complex128)
        psi[:, 0] = self.radius[0]
        psi[:, 1] = self.radius[1] * np.exp(1j * phis[:, 0])
        psi[:, 2] = self.radius[2] * np.exp(1j * phis[:, 1])
        return psi

    def final_actions(self, phis) -> np.ndarray:
        psi = _run(self._psi0(phis), self.protocol, self.params, self.steps)
        return np.abs(psi[:, 1:]) ** 2

    def jacobian(self, phis, central: bool = True) -> np.ndarray:
        phis = np.atleast_2d(phis)
        d = self.shoot.fd_step
        m = phis.shape[0]
        e2 = np.array([d, 0.0])
        e3 = np.array([0.0, d])
        if central:
            vals = self.final_actions(np.concatenate([phis + e2, phis - e2, phis + e3, phis - e3]))
            c2 = (vals[:m] - vals[m:2 * m]) / (2 * d)
            c3 = (vals[2 * m:3 * m] - vals[3 * m:]) / (2 * d)
        else:
            vals = self.final_actions(np.concatenate([phis, phis + e2, phis + e3]))
            c2 = (vals[m:2 * m] - vals[:m]) / d
            c3 = (vals[2 * m:] - vals[:m]) / d
        return np.stack([c2, c3], axis=-1)  # [sample, component, phase]

    def _starts(self, target):
        t2, t3 = target
        A = self.X2 - t2
        B = self.X3 - t3
        corners_a = np.stack([A, np.roll(A, -1, 0), np.roll(A, -1, 1), np.roll(np.roll(A, -1, 0), -1, 1)])
        corners_b = np.stack([B, np.roll(B, -1, 0), np.roll(B, -1, 1), np.roll(np.roll(B, -1, 0), -1, 1)])
        ok = ((corners_a.min(0) <= 0) & (corners_a.max(0) >= 0) &
              (corners_b.min(0) <= 0) & (corners_b.max(0) >= 0))
        # one start per local minimum of the residual among bracketing cells;
        # neighbouring cells around one root would all converge to it
        score = np.where(ok, np.maximum(np.abs(corners_a.mean(0)), np.abs(corners_b.mean(0))), np.inf)
        ok &= score == minimum_filter(score, size=3, mode="wrap")
        i, j = np.nonzero(ok)
        step = TWO_PI / self.res
        return np.column_stack([(i + 0.5) * step, (j + 0.5) * step])

    def solve(self, targets) -> list[Trajectory]:
        """Roots for each final state in ``targets`` (occupation triples)."""
        targets = [tuple(int(n) for n in t) for t in targets]
        starts, owner = [], []
        for k, t in enumerate(targets):
            s = self._starts((t[1] + 0.5, t[2] + 0.5))
            starts.append(s)
            owner.append(np.full(len(s), k))
        if not starts or sum(len(s) for s in starts) == 0:
            return []
        phi = np.concatenate(starts)
        owner = np.concatenate(owner)
        goal = np.array([[targets[k][1] + 0.5, targets[k][2] + 0.5] for k in owner])
        tol = self.shoot.root_tolerance
        alive = np.ones(len(phi), dtype=bool)
        conv = np.zeros(len(phi), dtype=bool)
        max_step = 2.0 * TWO_PI / self.res
        history = np.full((STALL_WINDOW, len(phi)), np.inf)
        for it in range(self.shoot.max_newton_iters):
            idx = np.flatnonzero(alive & ~conv)
            if idx.size == 0:
                break
            jac = self.jacobian(phi[idx], central=False)
            F = self.final_actions(phi[idx]) - goal[idx]
            res = np.max(np.abs(F), axis=1)
            good = res < tol
            conv[idx[good]] = True
            # drop starts whose residual has not halved in the last few iterations
            history[it % STALL_WINDOW, idx] = res
            if it >= STALL_WINDOW:
                earlier = history[(it + 1) % STALL_WINDOW, idx]
                stalled = ~good & (res > 0.5 * earlier)
                alive[idx[stalled]] = False
            idx, jac, F = idx[~good], jac[~good], F[~good]
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            sing = np.abs(det) < CAUSTIC_THRESHOLD
            alive[idx[sing]] = False
            idx, jac, F, det = idx[~sing], jac[~sing], F[~sing], det[~sing]
            dx0 = -(jac[:, 1, 1] * F[:, 0] - jac[:, 0, 1] * F[:, 1]) / det
            dx1 = -(-jac[:, 1, 0] * F[:, 0] + jac[:, 0, 0] * F[:, 1]) / det
            dx = np.column_stack([dx0, dx1])
            norm = np.max(np.abs(dx), axis=1)
            scale = np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
            phi[idx] = (phi[idx] + dx * scale[:, None]) % TWO_PI
        # starts that did not converge are dropped
        out = []
        for k, t in enumerate(targets):
            sel = np.flatnonzero(conv & (owner == k))
            if sel.size == 0:
                continue
            roots = self._dedup(phi[sel])
            jac = self.jacobian(roots)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            for r, dv in zip(roots, det):
                caustic = abs(dv) < CAUSTIC_THRESHOLD
                w = 0.0 if caustic else 1.0 / (TWO_PI ** 2 * abs(dv))
                out.append(Trajectory(t, r.copy(), float(dv), w, caustic))
        return out

    def _dedup(self, roots):
        keep = []
        dist = self.shoot.dedup_distance
        for r in roots:
            if not any(np.max(np.abs((r - q + np.pi) % TWO_PI - np.pi)) <= dist for q in keep):
                keep.append(r)
        return np.array(keep)


def shoot_trajectories_three_site(initial_n, final, protocol: DriveProtocol,
                                  params: ModelParams, shoot: ShootingConfig = ShootingConfig(),
                                  cfg: IntegratorConfig = IntegratorConfig()) -> list[Trajectory]:
    return ThreeSiteShooter(initial_n, protocol, params, shoot, cfg).solve([final])


# -- shooting distributions ---------------------------------------------------------

def classical_transition_shoot(initial_n, protocol: DriveProtocol, params: ModelParams,
                               shoot: ShootingConfig = ShootingConfig(),
                               cfg: IntegratorConfig = IntegratorConfig(),
                               mode: str = "point", basis: FockBasis | None = None):
    """Shooting estimate of ``P^C(n^B | n^A)`` over every final Fock state.

    ``mode="point"`` evaluates the trajectory sum at the cell centre
    ``n^B + 1/2``.  ``mode="bin"`` (two sites only) integrates the density
    over each unit cell exactly, as the phase measure between the roots at
    the integer cell edges.  Returns ``(distribution, trajectories)``.
    """
    if mode not in ("point", "bin"):
        raise ConfigError(f"unknown shooting mode {mode!r}")
    if basis is None:
        basis = build_basis(params)
    N = params.N
    probs = np.zeros(basis.dim)
    flags = [""] * basis.dim
    trajs: list[Trajectory] = []
    if params.L == 2:
        shooter = TwoSiteShooter(initial_n, protocol, params, shoot, cfg)
        for n1 in range(N + 1):
            k = basis.index((n1, N - n1))
            tr = shooter.trajectories(n1)
            trajs.extend(tr)
            probs[k] = sum(t.weight for t in tr)
            if any(t.caustic for t in tr):
                flags[k] = "caustic"
        if mode == "bin":
            binned = shooter.bin_probabilities()
            for n1 in range(N + 1):
                probs[basis.index((n1, N - n1))] = binned[n1]
    elif params.L == 3:
        if mode == "bin":
            raise ConfigError("bin-integrated shooting is only available for two sites")
        shooter = ThreeSiteShooter(initial_n, protocol, params, shoot, cfg)
        trajs = shooter.solve([basis.state(k) for k in range(basis.dim)])
        for t in trajs:
            k = basis.index(t.target)
            probs[k] += t.weight
            if t.caustic:
                flags[k] = "caustic"
    else:
        raise ConfigError("shooting is implemented for L = 2 and L = 3 only")
    dist = TransitionDistribution(basis=basis, initial_state=tuple(initial_n),
                                  probabilities=probs, provenance="classical-shoot",
                                  count=len(trajs), flags=flags,
                                  statistical_error=np.zeros(basis.dim))
    n_caustic = sum(t.caustic for t in trajs)
    if n_caustic:
        dist.warnings.append(f"{n_caustic} caustic trajectories excluded")
    return dist, trajs


def agreement(a: TransitionDistribution, b: TransitionDistribution, nsigma: float = 3.0):
    """Per-bin ``|a - b| <= nsigma * combined standard error``.

    Bins flagged in either distribution are skipped.  Returns
    ``(fraction_ok, ok_mask, considered_mask)``.
    """
    ea = a.statistical_error if a.statistical_error is not None else np.zeros_like(a.probabilities)
    eb = b.statistical_error if b.statistical_error is not None else np.zeros_like(b.probabilities)
    sigma = np.sqrt(ea ** 2 + eb ** 2)
    diff = np.abs(a.probabilities - b.probabilities)
    considered = np.array([not (fa or fb) for fa, fb in zip(a.flags, b.flags)])
    ok = diff <= nsigma * sigma
    ok |= diff == 0.0
    frac = float(np.mean(ok[considered])) if considered.any() else 1.0
    return frac, ok, considered
