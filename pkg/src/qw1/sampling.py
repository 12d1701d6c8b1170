"""Seeded random states and Hamiltonians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import DensityMatrix, HermitianOperator, Region

ENSEMBLES = ("haar_pure", "hs_mixed", "diag_dirichlet", "gue_hamiltonian")


@dataclass(frozen=True)
class RandomSpec:
    seed: int
    ensemble: str
    region: Region

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.ensemble!r}; expected one of {ENSEMBLES}")


def _ginibre(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def haar_vector(rng, dim):
    """First column of a Haar unitary (QR of a Ginibre matrix with phases fixed)."""
    Q, R = np.linalg.qr(_ginibre(rng, dim, dim))
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q[:, 0] * ph[0]


def haar_pure(rng, region: Region) -> DensityMatrix:
    return DensityMatrix.pure(region, haar_vector(rng, region.dim))


def hs_mixed(rng, region: Region) -> DensityMatrix:
    G = _ginibre(rng, region.dim, region.dim)
    W = G @ G.conj().T
    return DensityMatrix(region, W / np.trace(W).real)


def diag_dirichlet(rng, region: Region) -> DensityMatrix:
    return DensityMatrix(region, np.diag(rng.dirichlet(np.ones(region.dim))))


def gue_hamiltonian(rng, region: Region) -> HermitianOperator:
    """Gaussian Hermitian matrix rescaled to unit operator norm."""
    G = _ginibre(rng, region.dim, region.dim)
    H = (G + G.conj().T) / 2
    return HermitianOperator(region, H / np.abs(np.linalg.eigvalsh(H)).max())


_SAMPLERS = {
    "haar_pure": haar_pure,
    "hs_mixed": hs_mixed,
    "diag_dirichlet": diag_dirichlet,
    "gue_hamiltonian": gue_hamiltonian,
}


def sample(spec: RandomSpec):
    """Deterministic draw: identical specs give identical matrices."""
    rng = np.random.default_rng(spec.seed)
    return _SAMPLERS[spec.ensemble](rng, spec.region)


def random_state(rng, region: Region, mix=("haar_pure", "hs_mixed", "diag_dirichlet")):
    """State from an ensemble chosen uniformly among ``mix``."""
    kind = mix[int(rng.integers(len(mix)))]
    return _SAMPLERS[kind](rng, region)


def random_site_state(rng, q, site=0, full_rank=True) -> DensityMatrix:
    """One-site mixed state; full rank with eigenvalues bounded away from 0."""
    rho = hs_mixed(rng, Region([site], q))
    if full_rank:
        M = 0.9 * rho.matrix + 0.1 * np.eye(q) / q
        rho = DensityMatrix(rho.region, M)
    return rho


def random_traceless(rng, region: Region) -> HermitianOperator:
    """Difference of two random states, so trace zero and trace norm at most 2."""
    return random_state(rng, region) - random_state(rng, region)
