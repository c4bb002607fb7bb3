"""Transition distributions over final Fock states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fock import FockBasis

PROVENANCES = ("quantum", "classical-mc", "classical-shoot")


@dataclass
class TransitionDistribution:
    """``P(n^B | n^A)`` indexed by the final state's basis index.

    ``count`` is the number of Monte-Carlo samples or shooting trajectories
    behind the estimate.  ``leakage`` is the fraction of samples that landed
    outside every Fock bin (Monte Carlo only).  ``flags`` holds per-bin
    markers such as ``"caustic"``.
    """

    basis: FockBasis
    initial_state: tuple
    probabilities: np.ndarray
    provenance: str
    count: int = 0
    statistical_error: np.ndarray | None = None
    leakage: float = 0.0
    flags: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not self.flags:
            self.flags = [""] * len(self.probabilities)

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))

    def by_n1(self) -> np.ndarray:
        """Probabilities ordered by ascending lexicographic final state.

        For two sites this is indexed directly by ``n_1^B = 0..N``.
        """
        return self.probabilities[self.basis.paper_order()]

    def error_by_n1(self) -> np.ndarray:
        if self.statistical_error is None:
            return np.zeros_like(self.probabilities)
        return self.statistical_error[self.basis.paper_order()]
