import functools

import pytest

from bhwork.classical_dynamics import ClassicalInitialEnsemble
from bhwork.classical_prob import classical_transition_mc
from bhwork.fock import ModelParams
from bhwork.protocol import DriveProtocol
from bhwork.quantum_dynamics import quantum_transition_probs

MC_SAMPLES = 100_000
MC_SEED = 20240611


class PaperRuns:
    """Quantum and Monte Carlo transition distributions for the standard drive,
    computed once per configuration and shared across tests."""

    def __init__(self):
        self.protocol = DriveProtocol()

    @staticmethod
    def start(L, N):
        if L == 2:
            return (N // 2, N - N // 2)
        if (L, N) == (3, 20):
            return (5, 5, 10)
        raise KeyError((L, N))

    @functools.lru_cache(maxsize=None)
    def quantum(self, L, N):
        return quantum_transition_probs(self.start(L, N), self.protocol, ModelParams.paper(L, N))

    @functools.lru_cache(maxsize=None)
    def mc(self, L, N):
        ens = ClassicalInitialEnsemble(self.start(L, N), MC_SAMPLES, MC_SEED)
        return classical_transition_mc(ens, self.protocol, ModelParams.paper(L, N))


@pytest.fixture(scope="session")
def paper_runs():
    return PaperRuns()


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line; returns ``ok`` for asserting."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
