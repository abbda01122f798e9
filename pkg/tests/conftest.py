import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multimembrane import C, MembraneSpec, membrane_reflectivity  # noqa: E402
from multimembrane.core import CavityWarning, length_index_for_ratio  # noqa: E402

LAMBDA = 1064e-9
OMEGA = 2 * math.pi * C / LAMBDA
Q_ZPF = 1e-15

ACCEPTANCE_LINES = []


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=CavityWarning)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def length_index(kind, N, membrane, target=1e3, spacing_index=0):
    theta = membrane_reflectivity(membrane, OMEGA)[1]
    return length_index_for_ratio(kind, N, theta, LAMBDA, spacing_index, target)


@pytest.fixture
def half_mirror():
    return MembraneSpec.from_reflectivity(0.5)


def random_config(rng, max_N=6, slabs=True, length=None):
    """Random lossless configuration with well separated membranes."""
    from multimembrane import CavityConfig

    N = int(rng.integers(0, max_N + 1))
    L = length or LAMBDA * float(rng.uniform(60, 160))
    membranes = []
    for _ in range(N):
        if slabs and rng.random() < 0.5:
            membranes.append(MembraneSpec.slab(float(rng.uniform(1.5, 3.0)),
                                               float(rng.uniform(20e-9, 200e-9))))
        else:
            membranes.append(MembraneSpec.from_reflectivity(float(rng.uniform(0.05, 0.95))))
    # positions: N points at least 2 wavelengths apart and from the mirrors
    usable = L - 4 * LAMBDA * (N + 1)
    cuts = np.sort(rng.uniform(0, usable, N))
    positions = [-0.5 * L + 2 * LAMBDA * (2 * j + 1) + c for j, c in enumerate(cuts)]
    return CavityConfig(LAMBDA, L, tuple(membranes), tuple(positions))


def center_at_ratio(N, membrane, target=1e3):
    """Centre array (spacing index 0) with free length over spacing within 1% of ``target``."""
    from multimembrane import build_center_array

    return build_center_array(N, membrane, LAMBDA, 0, length_index("center-array", N, membrane, target))


def mirror_at_ratio(N, membrane, target=1e3):
    from multimembrane import build_mirror_array

    return build_mirror_array(N, membrane, LAMBDA, 0, length_index("mirror-array", N, membrane, target))
