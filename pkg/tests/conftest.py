"""Shared fixtures and independent oracles for the test suite."""

from fractions import Fraction

import numpy as np
import pytest
from mpmath import mp, mpf

from pbda.data_io import LabeledSample, UnlabeledSample

mp.dps = 40


def mp_erf(x):
    return float(mp.erf(mpf(x)))


def mp_probit(x):
    return float((1 - mp.erf(mpf(x) / mp.sqrt(2))) / 2)


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_sample(rng, m, d, labeled=True):
    X = rng.normal(size=(m, d))
    if labeled:
        return LabeledSample(X, rng.choice([-1, 1], size=m))
    return UnlabeledSample(X)


def random_finite_vote(rng, max_votes=5, max_examples=8, exact=True):
    """Random prediction table with random rational (or float) weights."""
    n_votes = int(rng.integers(1, max_votes + 1))
    n = int(rng.integers(1, max_examples + 1))
    P = rng.choice([-1, 1], size=(n_votes, n))
    raw = rng.integers(0, 10, size=n_votes)
    if raw.sum() == 0:
        raw[0] = 1
    if exact:
        rho = np.array([Fraction(int(r), int(raw.sum())) for r in raw], dtype=object)
    else:
        rho = raw / raw.sum()
    return P, rho


# naive double-loop oracles over an explicit vote table


def loop_gibbs(P, rho, y):
    total = 0
    for h in range(len(rho)):
        err = sum(1 for i in range(len(y)) if P[h][i] != y[i])
        total += rho[h] * Fraction(err, len(y))
    return total


def loop_disagreement(P, rho):
    total = 0
    n = len(P[0])
    for h in range(len(rho)):
        for k in range(len(rho)):
            c = sum(1 for i in range(n) if P[h][i] != P[k][i])
            total += rho[h] * rho[k] * Fraction(c, n)
    return total


def loop_joint(P, rho, y):
    total = 0
    n = len(y)
    for h in range(len(rho)):
        for k in range(len(rho)):
            c = sum(1 for i in range(n) if P[h][i] != y[i] and P[k][i] != y[i])
            total += rho[h] * rho[k] * Fraction(c, n)
    return total


def loop_hdh(P_s, P_t, rho):
    best = 0
    ns, nt = len(P_s[0]), len(P_t[0])
    for h in range(len(rho)):
        for k in range(len(rho)):
            ds = Fraction(sum(1 for i in range(ns) if P_s[h][i] != P_s[k][i]), ns)
            dt = Fraction(sum(1 for i in range(nt) if P_t[h][i] != P_t[k][i]), nt)
            best = max(best, abs(dt - ds))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
