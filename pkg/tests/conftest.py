"""Shared fixtures and helpers for the test suite.

Random inputs come from counter-based generators keyed per test so
failures replay exactly.  The terminal summary prints one PASS/FAIL line
per numbered gate in test_acceptance.py.
"""

import re

import numpy as np
import pytest

from bwopt import DiscreteDistribution, GaussianMeasure, SpdMatrix, haar_orthogonal


def philox(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def random_spd(rng, d, lo=0.5, hi=2.0):
    """SPD matrix with Haar eigenbasis and uniform spectrum in [lo, hi]."""
    q = haar_orthogonal(d, rng)
    vals = np.sort(rng.uniform(lo, hi, size=d))
    return SpdMatrix.from_eigh(vals, q)


def random_weights(rng, n):
    w = rng.uniform(0.2, 1.0, size=n)
    return w / w.sum()


def random_instance(rng, n, d, lo=0.5, hi=2.0, uniform_weights=False):
    covs = [random_spd(rng, d, lo, hi) for _ in range(n)]
    w = None if uniform_weights else random_weights(rng, n)
    return DiscreteDistribution.from_covariances(covs, w)


def random_noncentered(rng, n, d, lo=0.5, hi=2.0, mean_scale=1.0):
    atoms = [GaussianMeasure(rng.normal(scale=mean_scale, size=d),
                             random_spd(rng, d, lo, hi))
             for _ in range(n)]
    return DiscreteDistribution(atoms, random_weights(rng, n))


def central_difference(f, sigma, y, h):
    """Symmetric difference of f along the Euclidean direction y at sigma."""
    up = SpdMatrix(sigma.entries + h * y)
    down = SpdMatrix(sigma.entries - h * y)
    return (f(up) - f(down)) / (2.0 * h)


def random_direction(rng, d):
    y = rng.normal(size=(d, d))
    y = 0.5 * (y + y.T)
    return y / np.linalg.norm(y)


_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    num = int(m.group(1))
    ok = _outcomes.setdefault(num, True)
    if report.when == "call":
        _outcomes[num] = ok and report.outcome == "passed"
    elif report.outcome not in ("passed",):
        _outcomes[num] = False


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("-", "acceptance gates")
    for num in sorted(_outcomes):
        word = "PASS" if _outcomes[num] else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {word}")
