import numpy as np
import pytest

import rwre
from rwre import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile everything once so individual test timings stay honest
    _kernels.warmup()


@pytest.fixture(scope="session")
def canonical():
    """The workhorse drift-positive R=2 law."""
    return rwre.site_law(0.2, [0.5, 0.3])


@pytest.fixture(scope="session")
def homog_env(canonical):
    return rwre.sample_environment(rwre.homogeneous_law(canonical), (0, 0))


@pytest.fixture(scope="session")
def period2_env():
    return rwre.sample_environment(
        rwre.periodic_law(
            [rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.3, [0.45, 0.25])]
        ),
        (0, 0),
    )


@pytest.fixture(scope="session")
def iid_law():
    return rwre.iid_law(
        [rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.25, [0.45, 0.3])],
        [0.5, 0.5],
    )


@pytest.fixture(scope="session")
def iid_env(iid_law):
    return rwre.sample_environment(iid_law, (-4, 4), seed=7)


def absorption_exit_solve(env, i, n):
    """First-step linear system for the exit distribution: the oracle the
    matrix-product code is tested against."""
    states = list(range(-n, i + 1))
    idx = {s: k for k, s in enumerate(states)}
    m, R = len(states), env.R
    T = np.zeros((m, m))
    rhs = np.zeros((m, R))
    for s in states:
        law = env.law_at(s)
        if s - 1 in idx:
            T[idx[s], idx[s - 1]] = law.q
        for z, pz in enumerate(law.p, start=1):
            if s + z in idx:
                T[idx[s], idx[s + z]] = pz
            elif s + z > i:
                rhs[idx[s], s + z - i - 1] += pz
    return np.linalg.solve(np.eye(m) - T, rhs)[idx[i]]
