import os

import numpy as np
import pytest

from unitary_anderson.model import LatticeBox, ModelParams, PhaseDistribution, sample_phase_field

CRITERIA = []

# acceptance runs use this many workers; results do not depend on it
WORKERS = int(os.environ.get("UA_TEST_WORKERS", "8"))


def record(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return ModelParams(0.5)


@pytest.fixture
def small_field():
    def make(a=0, b=15, lo=0.0, hi=2 * np.pi, seed=0):
        return sample_phase_field(PhaseDistribution.uniform(lo, hi), LatticeBox.interval(a, b), seed)
    return make
