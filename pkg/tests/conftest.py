"""Shared fixtures.

The default system (cat map + Bolza group + calibrated bump) is built once
per session: the group-ball dedup and the bump cut-set search are not free,
and every module wants the same instance anyway.
"""
import numpy as np
import pytest

from skewlab import default_bump, default_system


@pytest.fixture(scope="session")
def system():
    return default_system()


@pytest.fixture(scope="session")
def G(system):
    return system.G


@pytest.fixture(scope="session")
def bump(system):
    return default_bump(system.G)


@pytest.fixture(scope="session")
def frames(G):
    """A small fixed batch of Haar frames for invariance checks."""
    from skewlab import haar_frames
    from skewlab.rng import stream

    return haar_frames(G, 64, stream(987))


def assert_frames_close(A, B, tol):
    __tracebackhide__ = True
    err = float(np.max(np.abs(np.asarray(A) - np.asarray(B))))
    assert err < tol, f"frame mismatch {err:.3e} >= {tol:.1e}"
