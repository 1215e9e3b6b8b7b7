from __future__ import annotations

import numpy as np

from rdhte.model import RdSample, validate_sample


def random_instance(
    seed, n=200, d=1, binary=True, noise=0.5, cutoff=0.0
) -> RdSample:
    """Small random sample with signal on both sides, for oracle tests."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=n) + cutoff
    if d == 0:
        w = np.empty((n, 0))
    elif binary:
        w = rng.binomial(1, 0.5, size=(n, d)).astype(float)
    else:
        w = rng.uniform(-1, 1, size=(n, d))
    t = (x >= cutoff).astype(float)
    u = x - cutoff
    y = 0.3 + 0.8 * u + t * (0.5 + 0.2 * u)
    for ell in range(d):
        y = y + (0.4 - 0.3 * u + t * (0.25 + 0.15 * u)) * w[:, ell]
    y = y + noise * rng.standard_normal(n)
    return validate_sample(y, x, cutoff, w if d else None)
