"""Command-line front end.

    bhwork spectrum   --config exp.json --out results/
    bhwork transition --config exp.json --seed 7
    bhwork converge   --config sweep.json
    bhwork workdist   --config thermal.json --set initial.beta=1.0
    bhwork dos        --config exp.json

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .classical_dynamics import ClassicalInitialEnsemble, initial_amplitudes, trajectory
from .classical_prob import classical_transition_mc, classical_transition_shoot
from .config import ExperimentConfig
from .errors import BHWorkError, ConfigError, ConvergenceError, ResourceLimitError
from .fock import build_basis, build_hamiltonian, spectrum_sweep
from .quantum_dynamics import quantum_transition_matrix, quantum_transition_probs
from .work_stats import (GROUND_STATE, assemble_work_distribution, classical_initial,
                         deterministic_initial, gibbs_initial, ordering_shift, transition_rmse,
                         weyl_dos_mc)

log = logging.getLogger("bhwork")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_RESOURCE = 0, 2, 3, 4


def _initial_fock(cfg: ExperimentConfig, N: int, L: int) -> tuple:
    if cfg.initial.fock is not None:
        occ = tuple(int(n) for n in cfg.initial.fock)
        if len(occ) != L or sum(occ) != N or min(occ) < 0:
            raise ConfigError(f"initial Fock state {occ} does not have L={L} sites and N={N}")
        return occ
    if L == 2 and N % 2 == 0:
        return (N // 2, N // 2)
    raise ConfigError("initial.fock is required unless L = 2 with even N")


def _out(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_spectrum(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    params = cfg.model.params()
    h = build_hamiltonian(build_basis(params))
    sp = cfg.spectrum
    J = np.linspace(sp.J_min, sp.J_max, sp.points)
    levels = spectrum_sweep(h, J, max_dim=sp.max_dense)
    path = io.write_spectrum_csv(_out(cfg) / "spectrum.csv", J, levels)
    io.write_sidecar(path, cfg.to_dict(), cfg.seed, time.perf_counter() - t0,
                     {"levels": h.dim, "J_points": int(sp.points)})
    return {"spectrum": str(path)}


def _run_methods(cfg: ExperimentConfig, params, occ, outdir: Path, basis, h):
    """Run every configured method; returns ``(results, status)``."""
    protocol = cfg.protocol.protocol()
    results, status = {}, {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            extra = {}
            if method == "quantum":
                dist = quantum_transition_probs(occ, protocol, params, cfg.integrator, h=h)
                extra["norm"] = dist.total
            elif method == "classical-mc":
                ens = ClassicalInitialEnsemble(occ, cfg.samples, cfg.seed, cfg.phase_policy)
                dist = classical_transition_mc(ens, protocol, params, cfg.integrator, basis,
                                               threads=cfg.threads)
                extra["leakage"] = dist.leakage
            else:
                dist, trajs = classical_transition_shoot(occ, protocol, params, cfg.shooting,
                                                         cfg.integrator, mode=cfg.shoot_mode,
                                                         basis=basis)
                diag = io.write_shoot_diagnostics(outdir / "shoot_diagnostics.csv", trajs)
                io.write_sidecar(diag, cfg.to_dict(), cfg.seed, time.perf_counter() - t0)
                extra["trajectories"] = len(trajs)
            path = io.write_transition_csv(outdir / f"transition_{method}.csv", dist)
            extra["warnings"] = dist.warnings
            io.write_sidecar(path, cfg.to_dict(), cfg.seed, time.perf_counter() - t0,
                             {"N": params.N, "initial_state": list(occ), **extra})
            results[method] = dist
            status[method] = {"status": "ok", "file": path.name, **extra}
        except ConvergenceError as exc:
            status[method] = {"status": "non-convergence", "error": str(exc),
                              "drift": exc.drift}
    return results, status


def cmd_transition(cfg: ExperimentConfig) -> dict:
    params = cfg.model.params()
    occ = _initial_fock(cfg, params.N, params.L)
    basis = build_basis(params)
    h = build_hamiltonian(basis)
    out = _out(cfg)
    results, status = _run_methods(cfg, params, occ, out, basis, h)
    manifest = {"command": "transition", "N": params.N, "initial_state": list(occ),
                "methods": status}
    if "quantum" in results and "classical-mc" in results:
        manifest["rmse_quantum_vs_mc"] = transition_rmse(results["quantum"], results["classical-mc"])
    if cfg.trajectory_dump:
        manifest["trajectory_dump"] = _dump_trajectories(cfg, params, occ, out)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    if any(s["status"] != "ok" for s in status.values()):
        raise ConvergenceError("one or more methods did not converge; see manifest.json")
    return manifest


def _dump_trajectories(cfg, params, occ, out: Path) -> str:
    spec = cfg.trajectory_dump
    count = int(spec.get("samples", 10))
    times = [float(t) for t in spec.get("times", np.linspace(0, cfg.protocol.tau, 11))]
    steps = int(spec.get("steps", cfg.integrator.base_steps << 3))
    ens = ClassicalInitialEnsemble(occ, max(count, 1), cfg.seed, cfg.phase_policy)
    psi0 = initial_amplitudes(ens, 0, count)
    fields = trajectory(psi0, cfg.protocol.protocol(), params, times, steps)
    path = io.write_trajectory_csv(out / "trajectories.csv", times, fields)
    return path.name


def _dedupe(values) -> list[int]:
    seen, out = set(), []
    for v in values:
        if v in seen:
            log.warning("duplicate N=%d in N_list ignored", v)
            continue
        seen.add(v)
        out.append(v)
    return out


def cmd_converge(cfg: ExperimentConfig) -> dict:
    if cfg.model.L != 2:
        raise ConfigError("converge runs the two-site experiment only (model.L = 2)")
    Ns = cfg.model.N_list or ([cfg.model.N] if cfg.model.N else [])
    if not Ns:
        raise ConfigError("model.N_list must be non-empty")
    Ns = _dedupe(int(n) for n in Ns)
    odd = [n for n in Ns if n % 2]
    if odd:
        raise ConfigError(f"N must be even, got {odd}")
    t0 = time.perf_counter()
    out = _out(cfg)
    sub = ExperimentConfig.from_dict({**cfg.to_dict(), "methods": ["quantum", "classical-mc"]})
    rows, per_n = [], {}
    for N in Ns:
        params = cfg.model.params(N)
        basis = build_basis(params)
        h = build_hamiltonian(basis)
        results, status = _run_methods(sub, params, (N // 2, N // 2), out / f"N{N}", basis, h)
        per_n[N] = status
        if len(results) < 2:
            raise ConvergenceError(f"N={N}: " + "; ".join(
                s.get("error", "") for s in status.values() if s["status"] != "ok"))
        rows.append((N, transition_rmse(results["quantum"], results["classical-mc"])))
        log.info("N=%d R=%.6g", N, rows[-1][1])
    path = io.write_rmse_csv(out / "rmse.csv", rows)
    io.write_sidecar(path, cfg.to_dict(), cfg.seed, time.perf_counter() - t0,
                     {"N_values": Ns, "per_N": per_n})
    return {"rmse": rows}


def cmd_workdist(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    params = cfg.model.params()
    basis = build_basis(params)
    h = build_hamiltonian(basis)
    protocol = cfg.protocol.protocol()
    if protocol.J(0.0) != 0.0 or protocol.J(protocol.tau) != 0.0:
        raise ConfigError("work distributions need J(0) = J(tau) = 0 so that Fock states are eigenstates")
    E = h.diagonal
    beta = cfg.initial.beta
    if cfg.initial.fock is not None:
        occ = _initial_fock(cfg, params.N, params.L)
        init_q = deterministic_initial(basis.dim, basis.index(occ))
        init_c = init_q
    elif beta is not None:
        if isinstance(beta, str) and beta != GROUND_STATE:
            raise ConfigError(f"beta must be a number or {GROUND_STATE!r}")
        init_q = gibbs_initial(E, beta)
        init_c = None
    else:
        raise ConfigError("workdist needs initial.beta or initial.fock")
    out = _out(cfg)
    sidecar = {}
    if init_q.provenance == "deterministic":
        m = int(np.flatnonzero(init_q.probabilities)[0])
        rows_q = {m: quantum_transition_probs(basis.state(m), protocol, params, cfg.integrator, h=h)}
    else:
        rows_q = quantum_transition_matrix(protocol, h, cfg.integrator)
    wq = assemble_work_distribution(init_q, rows_q, E, E, "quantum")
    path = io.write_work_csv(out / "work_quantum.csv", wq)
    if not isinstance(beta, str) and beta is not None and cfg.initial.fock is None:
        sidecar["jarzynski"] = wq.exp_average(float(beta))
    sidecar["mean_work"] = wq.mean()
    io.write_sidecar(path, cfg.to_dict(), cfg.seed, time.perf_counter() - t0, sidecar)
    result = {"quantum": str(path), **sidecar}
    if "classical-mc" in cfg.methods:
        if init_c is None:
            # the classical energy sits a constant above the quantum one
            shift = ordering_shift(params)
            weyl = weyl_dos_mc(params, protocol.J(0.0), cfg.dos.bins, cfg.dos.samples, cfg.seed,
                               energy_range=(float(E.min()) - shift, float(E.max()) - shift))
            init_c = classical_initial(weyl, E, beta, energy_shift=shift)
        rows_c = {}
        for m in np.flatnonzero(init_c.probabilities > 0):
            ens = ClassicalInitialEnsemble(basis.state(int(m)), cfg.samples, cfg.seed,
                                           cfg.phase_policy)
            rows_c[int(m)] = classical_transition_mc(ens, protocol, params, cfg.integrator,
                                                     basis, threads=cfg.threads)
        wc = assemble_work_distribution(init_c, rows_c, E, E, "classical")
        cpath = io.write_work_csv(out / "work_classical.csv", wc)
        io.write_sidecar(cpath, cfg.to_dict(), cfg.seed, time.perf_counter() - t0,
                         {"mean_work": wc.mean(), "total_probability": wc.total})
        result["classical"] = str(cpath)
    return result


def cmd_dos(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    params = cfg.model.params()
    weyl = weyl_dos_mc(params, cfg.dos.J, cfg.dos.bins, cfg.dos.samples, cfg.seed)
    path = io.write_dos_csv(_out(cfg) / "dos.csv", weyl)
    io.write_sidecar(path, cfg.to_dict(), cfg.seed, time.perf_counter() - t0,
                     {"integral": weyl.integral(), "closed_form_measure": weyl.total_measure})
    return {"dos": str(path), "integral": weyl.integral(), "measure": weyl.total_measure}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "transition": cmd_transition,
    "converge": cmd_converge,
    "workdist": cmd_workdist,
    "dos": cmd_dos,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhwork", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = subs.add_parser(name)
        p.add_argument("--config", help="JSON experiment file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, help="worker threads for Monte-Carlo batches")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. model.N=50")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = list(args.set)
    if args.out is not None:
        overrides.append(f"output={json.dumps(args.out)}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    return cfg.with_overrides(overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResourceLimitError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BHWorkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
