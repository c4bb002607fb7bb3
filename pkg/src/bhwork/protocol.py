"""Drive protocol ``J(t)`` and integrator settings shared by both dynamics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# codes understood by the compiled kernels
SHAPE_CODES = {"parabolic": 0, "constant": 1}


@dataclass(frozen=True)
class DriveProtocol:
    """Tunnelling ramp ``J(t)`` on ``[0, tau]``.

    ``parabolic`` is ``J0 * (t - t**2/tau)``, vanishing at both ends.
    ``constant`` holds ``J = J0`` throughout and exists for testing
    conservation laws of the autonomous flow.  ``reverse`` runs the shape
    backwards in time, ``J(tau - t)``.
    """

    J0: float = 5.0
    tau: float = 10.0
    shape: str = "parabolic"
    reverse: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.shape not in SHAPE_CODES:
            raise ConfigError(f"unknown protocol shape {self.shape!r}")

    @property
    def shape_code(self) -> int:
        return SHAPE_CODES[self.shape]

    def J(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.reverse:
            t = self.tau - t
        if self.shape == "parabolic":
            return self.J0 * (t - t * t / self.tau)
        return np.full_like(t, self.J0)

    def integral(self) -> float:
        """``int_0^tau J(t) dt``."""
        if self.shape == "parabolic":
            return self.J0 * self.tau ** 2 / 6.0
        return self.J0 * self.tau

    def max_abs_J(self) -> float:
        if self.shape == "parabolic":
            return abs(self.J0) * self.tau / 4.0
        return abs(self.J0)

    def reversed(self) -> "DriveProtocol":
        return DriveProtocol(self.J0, self.tau, self.shape, not self.reverse)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 with step doubling.

    Doubling stops once the conservation drift is below ``norm_tolerance``
    and the largest change between successive refinements is below
    ``10 * norm_tolerance``.  ``pilot_samples`` is the size of the ensemble
    subset used to pick the step count for Monte-Carlo batches.
    """

    base_steps: int = 4096
    norm_tolerance: float = 1e-8
    max_refinements: int = 12
    pilot_samples: int = 64

    def __post_init__(self):
        if self.base_steps < 1:
            raise ConfigError("base_steps must be >= 1")
        if not self.norm_tolerance > 0:
            raise ConfigError("norm_tolerance must be positive")
        if self.max_refinements < 0:
            raise ConfigError("max_refinements must be >= 0")
        if self.pilot_samples < 1:
            raise ConfigError("pilot_samples must be >= 1")

    def step_counts(self):
        for r in range(self.max_refinements + 1):
            yield self.base_steps << r
