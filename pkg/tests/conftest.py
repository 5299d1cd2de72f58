"""Shared fixtures and the independent brute-force oracle.

The oracle is deliberately naive: pure-Python double loops over spins and
configurations, no shared code with the package.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from spinlsi.model import ModelSpec, build_coupling


def naive_moments(M, t, f):
    """Brute-force Ising moments over all configurations.

    Returns a dict with log_z, probabilities (config-index order matching the
    package bit convention: bit x set -> sigma_x = -1), mean vector, and the
    two-point matrix, all computed with plain Python loops.
    """
    M = [list(map(float, row)) for row in np.asarray(M)]
    n = len(M)
    f = list(map(float, np.broadcast_to(np.asarray(f, dtype=float), (n,))))
    weights = []
    for index in range(2 ** n):
        sigma = [1.0 - 2.0 * ((index >> x) & 1) for x in range(n)]
        quad = 0.0
        for x in range(n):
            for y in range(n):
                quad += sigma[x] * M[x][y] * sigma[y]
        lin = sum(f[x] * sigma[x] for x in range(n))
        weights.append(math.exp(-0.5 * t * quad + lin))
    z = math.fsum(weights)
    probs = [w / z for w in weights]
    mean = [0.0] * n
    two_point = [[0.0] * n for _ in range(n)]
    for index, p in enumerate(probs):
        sigma = [1.0 - 2.0 * ((index >> x) & 1) for x in range(n)]
        for x in range(n):
            mean[x] += p * sigma[x]
            for y in range(n):
                two_point[x][y] += p * sigma[x] * sigma[y]
    return {"log_z": math.log(z), "probabilities": probs, "mean": mean,
            "two_point": two_point}


def naive_susceptibility(M, t):
    mom = naive_moments(M, t, 0.0)
    n = len(mom["mean"])
    return max(sum(mom["two_point"][x][y] for y in range(n)) for x in range(n))


BATTERY_SPECS = (
    [("path", {"length": k}, 1.0) for k in range(2, 7)]
    + [("cycle", {"length": k}, 1.0) for k in range(3, 7)]
    + [("grid2d", {"width": 3, "height": 2}, 1.0)]
    + [("complete", {"n": k}, 1.0 / k) for k in range(3, 6)]
)


def battery_models():
    """The verification battery: (label, CouplingMatrix) pairs."""
    out = []
    for kind, params, J in BATTERY_SPECS:
        spec = ModelSpec(kind, params, J=J)
        out.append((spec.label(), build_coupling(spec)))
    return out


@pytest.fixture(scope="session")
def battery():
    return battery_models()


@pytest.fixture
def path2():
    return build_coupling(ModelSpec("path", {"length": 2}, J=1.0))


@pytest.fixture
def path3():
    return build_coupling(ModelSpec("path", {"length": 3}, J=1.0))


@pytest.fixture
def cycle3():
    return build_coupling(ModelSpec("cycle", {"length": 3}, J=1.0))


@pytest.fixture
def single_site():
    return build_coupling(ModelSpec("path", {"length": 1}, J=1.0))
