"""Shared fixtures and independent oracle helpers.

The oracles here deliberately avoid the package's own composition helpers:
partial traces by explicit index loops, tensor products by reduce(np.kron),
matrix exponentials from scipy. Tests compare the fast implementations
against these slow-but-obvious paths.
"""

from functools import reduce

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


def random_unitary(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def naive_kron(mats):
    return reduce(np.kron, mats)


def naive_partial_trace(rho, keep, d):
    """Index-loop partial trace over the trailing sites."""
    n = 0
    dim = 1
    while dim < rho.shape[0]:
        dim *= d
        n += 1
    dk = d**keep
    dr = d ** (n - keep)
    out = np.zeros((dk, dk), dtype=complex)
    for a in range(dk):
        for b in range(dk):
            for c in range(dr):
                out[a, b] += rho[a * dr + c, b * dr + c]
    return out


def basis_vector(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v
