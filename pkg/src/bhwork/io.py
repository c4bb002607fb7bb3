"""CSV writers and JSON sidecars.

Floats are written with 17 significant digits so that files round-trip
exactly and repeated seeded runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def occ_str(occ) -> str:
    return " ".join(str(int(n)) for n in occ)


def _write(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def write_spectrum_csv(path, J_values, levels) -> Path:
    levels = np.asarray(levels)
    rows = ((fmt(J), k, fmt(E)) for J, lev in zip(J_values, levels) for k, E in enumerate(lev))
    return _write(path, ("J", "level_index", "energy"), rows)


def write_transition_csv(path, dist) -> Path:
    """Quantum rows use the short layout; classical rows add errors and flags."""
    basis = dist.basis
    if dist.provenance == "quantum":
        rows = ((k, occ_str(basis.states[k]), fmt(p), dist.provenance)
                for k, p in enumerate(dist.probabilities))
        return _write(path, ("final_state_index", "occupations", "probability", "provenance"), rows)
    err = dist.statistical_error if dist.statistical_error is not None else np.zeros(basis.dim)
    rows = ((k, occ_str(basis.states[k]), fmt(p), fmt(e), dist.provenance, dist.flags[k])
            for k, (p, e) in enumerate(zip(dist.probabilities, err)))
    return _write(path, ("final_state_index", "occupations", "probability", "std_error",
                         "provenance", "flags"), rows)


def write_shoot_diagnostics(path, trajectories) -> Path:
    rows = ((occ_str(t.target), " ".join(fmt(p) for p in t.phases), fmt(t.jacobian),
             fmt(t.weight), int(t.caustic)) for t in trajectories)
    return _write(path, ("target", "root_phase(s)", "derivative_or_det", "weight", "caustic_flag"),
                  rows)


def write_work_csv(path, wd) -> Path:
    rows = ((fmt(W), fmt(p), wd.provenance) for W, p in zip(wd.values, wd.probabilities))
    return _write(path, ("W", "probability", "provenance"), rows)


def write_rmse_csv(path, rows) -> Path:
    return _write(path, ("N", "R"), ((int(N), fmt(R)) for N, R in rows))


def write_dos_csv(path, weyl) -> Path:
    rows = ((fmt(a), fmt(b), fmt(d), fmt(e))
            for a, b, d, e in zip(weyl.edges[:-1], weyl.edges[1:], weyl.density, weyl.std_error))
    return _write(path, ("energy_lo", "energy_hi", "density", "std_error"), rows)


def write_trajectory_csv(path, times, fields, sample_ids=None) -> Path:
    """``fields`` has shape ``(len(times), samples, L)``."""
    fields = np.asarray(fields)
    if sample_ids is None:
        sample_ids = range(fields.shape[1])
    sample_ids = list(sample_ids)

    def rows():
        for s, sid in enumerate(sample_ids):
            for ti, t in enumerate(times):
                for j, psi in enumerate(fields[ti, s]):
                    yield sid, fmt(t), j + 1, fmt(psi.real), fmt(psi.imag)
    return _write(path, ("sample_id", "t", "site", "re_psi", "im_psi"), rows())


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_sidecar(csv_path, config: dict, seed, wall_time: float, extra: dict | None = None) -> Path:
    meta = {
        "file": Path(csv_path).name,
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "code_version": f"bhwork {__version__}",
        "python": platform.python_version(),
        "wall_time_s": wall_time,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        meta.update(extra)
    side = Path(str(csv_path) + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return side


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")
