from __future__ import annotations

import mpmath
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def mp_matfn(s, fun, dps: int = 40) -> np.ndarray:
    """Spectral matrix function evaluated with mpmath at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in np.asarray(s)])
        lam, q = mpmath.eigsy(a)
        d = mpmath.diag([fun(x) for x in lam])
        out = q * d * q.T
        return np.array([[float(out[i, j]) for j in range(3)] for i in range(3)])
