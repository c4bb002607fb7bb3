"""Exit criteria for the package, one PASS/FAIL line each.

Run alone with ``pytest -m acceptance -s``.  Quantum and Monte Carlo results
for the standard two- and three-site runs are shared through ``paper_runs``.
"""
import numpy as np
import pytest

from bhwork.classical_dynamics import ClassicalInitialEnsemble, evolve_ensemble, initial_amplitudes
from bhwork.classical_prob import agreement, classical_transition_shoot
from bhwork.cli import main
from bhwork.fock import ModelParams, basis_size, build_basis, build_hamiltonian
from bhwork.protocol import DriveProtocol
from bhwork.quantum_dynamics import propagate_block, quantum_transition_matrix
from bhwork.work_stats import (assemble_work_distribution, classical_initial, envelope_coverage,
                               gibbs_initial, ordering_shift, transition_rmse, weyl_dos_mc)

import oracles

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

DRIVE = DriveProtocol()
TWO_SITE_N = (10, 50, 100, 200)
CONFIGS = [(2, N) for N in TWO_SITE_N] + [(3, 20)]


def small_bases(max_dim=50):
    """Every ``(L, N)`` with ``L >= 2``, ``N >= 1`` and basis size at most ``max_dim``."""
    out = []
    for L in range(2, max_dim + 1):
        N = 1
        while basis_size(L, N) <= max_dim:
            out.append((L, N))
            N += 1
    return out


def test_1_unitarity(paper_runs, verdict):
    sums = {cfg: paper_runs.quantum(*cfg).total for cfg in CONFIGS}
    worst = max(abs(s - 1.0) for s in sums.values())
    detail = ", ".join(f"L={L} N={N}: {s - 1:+.1e}" for (L, N), s in sums.items())
    assert verdict("1 quantum rows sum to 1 +- 1e-8", worst <= 1e-8, detail)


def test_2_oracle_equivalence(verdict):
    cases = small_bases()
    worst, where = 0.0, None
    rng = np.random.default_rng(0)
    for L, N in cases:
        h = build_hamiltonian(build_basis(ModelParams.paper(L, N)))
        H0, K = np.diag(h.diagonal), h.hopping.toarray()
        ref = oracles.magnus4_propagator(H0, K, oracles.parabolic(DRIVE.J0, DRIVE.tau), DRIVE.tau)
        v = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
        block = np.stack([v / np.linalg.norm(v), np.eye(h.dim)[0], np.eye(h.dim)[-1]], axis=1)
        got = propagate_block(block, DRIVE, h)[0]
        err = float(np.max(np.abs(got - ref @ block)))
        if err > worst:
            worst, where = err, (L, N)
    assert verdict("2 propagation matches matrix-exponential oracle to 1e-6", worst <= 1e-6,
                   f"{len(cases)} bases, max error {worst:.1e} at L,N={where}")


def test_3_classical_norm_conservation(paper_runs, verdict):
    worst = 0.0
    for L, N in CONFIGS:
        start = paper_runs.start(L, N)
        psi0 = initial_amplitudes(ClassicalInitialEnsemble(start, 10_000, master_seed=3))
        final = evolve_ensemble(psi0, DRIVE, ModelParams.paper(L, N))[0]
        norms = np.sum(np.abs(final) ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(norms / (N + 0.5 * L) - 1.0))))
    assert verdict("3 total norm N + L/2 conserved to 1e-8 on 1e4 trajectories", worst <= 1e-8,
                   f"max relative deviation {worst:.1e}")


def test_4_shooting_matches_mc(paper_runs, verdict):
    mc = paper_runs.mc(2, 100)
    shoot, _ = classical_transition_shoot((50, 50), DRIVE, ModelParams.paper(2, 100), mode="bin")
    frac, ok, considered = agreement(shoot, mc, nsigma=3.0)
    assert verdict("4 binned shooting within 3 sigma of MC on >= 95% of non-caustic bins",
                   frac >= 0.95, f"{frac:.3f} of {int(considered.sum())} bins")


@pytest.mark.parametrize("N", [100, 200])
def test_5_classical_inside_quantum_envelope(paper_runs, verdict, N):
    frac, mask = envelope_coverage(paper_runs.quantum(2, N), paper_runs.mc(2, N))
    assert verdict(f"5 classical curve inside quantum envelope on >= 80% of bins (N={N})",
                   frac >= 0.8, f"{frac:.3f} of {int(mask.sum())} interior bins")


def test_6_rmse_decreases(paper_runs, verdict):
    R = [transition_rmse(paper_runs.quantum(2, N), paper_runs.mc(2, N)) for N in TWO_SITE_N]
    decreasing = all(b < a for a, b in zip(R, R[1:]))
    ok = decreasing and R[-1] < R[0] / 2
    assert verdict("6 R(N) strictly decreasing and R(200) < R(10)/2", ok,
                   ", ".join(f"R({N})={r:.4f}" for N, r in zip(TWO_SITE_N, R)))


def test_7_three_site_rmse(paper_runs, verdict):
    q, c = paper_runs.quantum(3, 20), paper_runs.mc(3, 20)
    R = transition_rmse(q, c)
    assert verdict("7 three-site RMSE < 0.05", R < 0.05, f"R={R:.4f}, M={q.basis.dim}")


def test_8_jarzynski(verdict):
    worst = 0.0
    for L, N in [(2, 1), (2, 5), (2, 10), (2, 20), (3, 3), (3, 6), (4, 3)]:
        h = build_hamiltonian(build_basis(ModelParams.paper(L, N)))
        P = quantum_transition_matrix(DRIVE, h)
        E = h.diagonal
        for beta in (0.1, 1.0, 10.0):
            wd = assemble_work_distribution(gibbs_initial(E, beta), P, E, E)
            worst = max(worst, abs(wd.exp_average(beta) - 1.0))
    assert verdict("8 <exp(-beta W)> = 1 +- 1e-6 for N <= 20", worst <= 1e-6,
                   f"max deviation {worst:.1e}")


def test_9_weyl_density(verdict):
    worst = 0.0
    for L, N in [(2, 100), (3, 20)]:
        weyl = weyl_dos_mc(ModelParams.paper(L, N), 0.0, samples=1_000_000, seed=11)
        exact = (4 / np.pi) ** L * oracles.sphere_area_closed_form(L, np.sqrt(N + L / 2)) \
            / (2 * np.sqrt(N + L / 2))
        worst = max(worst, abs(weyl.integral() / exact - 1.0))
    ok_a = verdict("9a integrated density within 1% of the closed-form measure", worst <= 0.01,
                   f"max relative error {worst:.1e}")

    params = ModelParams.paper(2, 100)
    E = build_hamiltonian(build_basis(params)).diagonal
    shift = ordering_shift(params)
    weyl = weyl_dos_mc(params, 0.0, samples=1_000_000, seed=11,
                       energy_range=(E.min() - shift, E.max() - shift))
    pc = classical_initial(weyl, E, 1.0, energy_shift=shift).probabilities
    pq = gibbs_initial(E, 1.0).probabilities
    mad = float(np.mean(np.abs(pq - pc)))
    tv = 0.5 * float(np.sum(np.abs(pq - pc)))
    ok_b = verdict("9b thermal initial distributions: mean |PQ - PC| < 0.02", mad < 0.02,
                   f"mean abs diff {mad:.2e}, total variation {tv:.3f}")
    assert ok_a and ok_b


def test_10_deterministic_output(tmp_path, verdict):
    commands = [
        ["transition", "--set", "model.N=10", "--set", "samples=4000",
         "--set", 'methods=["quantum","classical-mc","classical-shoot"]'],
        ["transition", "--set", "model.L=3", "--set", "model.N=6", "--set", "initial.fock=[1,2,3]",
         "--set", "samples=4000", "--set", "shooting.scan_resolution=48", "--set", 'methods=["quantum","classical-mc","classical-shoot"]'],
        ["workdist", "--set", "model.N=10", "--set", "initial.beta=1.0", "--set", "samples=2000",
         "--set", "dos.samples=50000"],
        ["dos", "--set", "model.N=10", "--set", "dos.samples=50000"],
        ["spectrum", "--set", "model.N=10", "--set", "spectrum.points=11"],
    ]
    mismatched, compared = [], 0
    for k, cmd in enumerate(commands):
        dirs = [tmp_path / f"{k}{tag}" for tag in "ab"]
        for d in dirs:
            assert main([*cmd, "--seed", "31337", "--out", str(d)]) == 0
        for f in sorted(dirs[0].glob("*.csv")):
            compared += 1
            if f.read_bytes() != (dirs[1] / f.name).read_bytes():
                mismatched.append(f"{k}/{f.name}")
    assert verdict("10 repeated seeded runs give byte-identical CSVs", compared > 0 and not mismatched,
                   f"{compared} files compared" + (f", differing: {mismatched}" if mismatched else ""))
