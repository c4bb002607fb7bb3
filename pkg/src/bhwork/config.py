"""Experiment configuration: one JSON document per experiment."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .classical_prob import ShootingConfig
from .errors import ConfigError
from .fock import ModelParams
from .protocol import DriveProtocol, IntegratorConfig

METHODS = ("quantum", "classical-mc", "classical-shoot")
U_RULES = ("fixed", "five-over-N")


@dataclass
class ModelSpec:
    L: int = 2
    N: int | None = 100
    N_list: list | None = None
    U_rule: str = "five-over-N"
    U: float | None = None
    boundary: str | None = None
    hbar: float = 1.0

    def params(self, N: int | None = None) -> ModelParams:
        N = self.N if N is None else N
        if N is None:
            raise ConfigError("model.N is required")
        U = 5.0 / N if self.U_rule == "five-over-N" else self.U
        return ModelParams(L=self.L, N=int(N), U=float(U), hbar=self.hbar, boundary=self.boundary)


@dataclass
class ProtocolSpec:
    J0: float = 5.0
    tau: float = 10.0
    shape: str = "parabolic"

    def protocol(self) -> DriveProtocol:
        return DriveProtocol(J0=self.J0, tau=self.tau, shape=self.shape)


@dataclass
class InitialSpec:
    fock: list | None = None
    beta: float | str | None = None


@dataclass
class SpectrumSpec:
    J_min: float = 0.0
    J_max: float = 5.0
    points: int = 101
    max_dense: int = 5000


@dataclass
class DOSSpec:
    J: float = 0.0
    samples: int = 1_000_000
    bins: int = 512


@dataclass
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    methods: list = field(default_factory=lambda: ["quantum", "classical-mc"])
    samples: int = 100_000
    seed: int = 0
    phase_policy: str = "all-random"
    shoot_mode: str = "point"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    shooting: ShootingConfig = field(default_factory=ShootingConfig)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    dos: DOSSpec = field(default_factory=DOSSpec)
    trajectory_dump: dict | None = None
    output: str = "out"
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        m = self.model
        if m.U_rule not in U_RULES:
            raise ConfigError(f"unknown U rule {m.U_rule!r}; expected one of {U_RULES}")
        if m.U_rule == "fixed" and m.U is None:
            raise ConfigError("U_rule 'fixed' needs model.U")
        if m.L < 1:
            raise ConfigError("model.L must be >= 1")
        bad = [x for x in self.methods if x not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s) {bad}; expected a subset of {list(METHODS)}")
        if "classical-shoot" in self.methods and m.L not in (2, 3):
            raise ConfigError("classical-shoot needs L = 2 or L = 3")
        if self.shoot_mode not in ("point", "bin"):
            raise ConfigError("shoot_mode must be 'point' or 'bin'")
        if self.shoot_mode == "bin" and m.L != 2 and "classical-shoot" in self.methods:
            raise ConfigError("shoot_mode 'bin' needs L = 2")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        # probe constructors for their own validation
        self.protocol.protocol()
        if m.N is not None:
            m.params()

    # -- (de)serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return _build(cls, data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, assignments) -> "ExperimentConfig":
        """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
        data = self.to_dict()
        for item in assignments:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"unknown config section {p!r} in {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config field {key!r}")
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(data)


def _build(cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object for {cls.__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)} in {cls.__name__}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value) if sub is not None and value is not None else value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


_NESTED = {
    (ExperimentConfig, "model"): ModelSpec,
    (ExperimentConfig, "protocol"): ProtocolSpec,
    (ExperimentConfig, "initial"): InitialSpec,
    (ExperimentConfig, "integrator"): IntegratorConfig,
    (ExperimentConfig, "shooting"): ShootingConfig,
    (ExperimentConfig, "spectrum"): SpectrumSpec,
    (ExperimentConfig, "dos"): DOSSpec,
}
