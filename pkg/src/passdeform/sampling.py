"""Random unitaries, channels and states used by audits and tests."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .qstate import DensityMatrix, MixtureOfUnitaries


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(dim: int, rng=None) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Ginibre matrix."""
    rng = rng_from(rng)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def block_unitary(dim: int, blocks: Sequence[Sequence[int]], rng=None) -> np.ndarray:
    """Unitary acting as an independent Haar unitary inside each block, identity elsewhere."""
    rng = rng_from(rng)
    u = np.eye(dim, dtype=complex)
    for b in blocks:
        b = np.asarray(b, dtype=int)
        if b.size > 1:
            u[np.ix_(b, b)] = haar_unitary(b.size, rng)
    return u


def permutation_unitary(perm: Sequence[int]) -> np.ndarray:
    """Unitary sending basis state |i> to |perm[i]>."""
    perm = np.asarray(perm, dtype=int)
    u = np.zeros((perm.size, perm.size))
    u[perm, np.arange(perm.size)] = 1.0
    return u


def random_weights(n: int, rng=None) -> np.ndarray:
    rng = rng_from(rng)
    w = rng.dirichlet(np.ones(n))
    return w / w.sum()


def random_mixture(dim: int, rng=None, n_terms: int | None = None, blocks=None) -> MixtureOfUnitaries:
    """Random mixture of 1-3 Haar unitaries (block-diagonal when `blocks` is given)."""
    rng = rng_from(rng)
    n = int(rng.integers(1, 4)) if n_terms is None else int(n_terms)
    if blocks is None:
        us = tuple(haar_unitary(dim, rng) for _ in range(n))
    else:
        us = tuple(block_unitary(dim, blocks, rng) for _ in range(n))
    return MixtureOfUnitaries(random_weights(n, rng), us)


def random_permutation_mixture(dim: int, rng=None, n_terms: int | None = None) -> MixtureOfUnitaries:
    rng = rng_from(rng)
    n = int(rng.integers(1, 4)) if n_terms is None else int(n_terms)
    us = tuple(permutation_unitary(rng.permutation(dim)) for _ in range(n))
    return MixtureOfUnitaries(random_weights(n, rng), us)


def random_channel(dim: int, rng=None, blocks=None) -> MixtureOfUnitaries:
    """Either a Haar mixture or a permutation mixture, chosen at random.

    Permutation mixtures hit the extreme points where passivity bounds are
    most nearly saturated, so audits mix both kinds.
    """
    rng = rng_from(rng)
    if blocks is None and rng.random() < 0.3:
        return random_permutation_mixture(dim, rng)
    return random_mixture(dim, rng, blocks=blocks)


def random_probabilities(dim: int, rng=None, floor: float = 1e-3) -> np.ndarray:
    rng = rng_from(rng)
    p = rng.dirichlet(np.ones(dim)) + floor
    return p / p.sum()


def random_diagonal_state(dim: int, rng=None, floor: float = 1e-3) -> DensityMatrix:
    return DensityMatrix.from_populations(random_probabilities(dim, rng, floor))


def random_density_matrix(dim: int, rng=None) -> DensityMatrix:
    rng = rng_from(rng)
    u = haar_unitary(dim, rng)
    p = random_probabilities(dim, rng)
    m = (u * p) @ u.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)
