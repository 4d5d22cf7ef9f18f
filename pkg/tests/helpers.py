"""Shared construction helpers for the test suite."""

import numpy as np

from hm_sim.bloch import DensityOperator, PureState


def random_pure(rng: np.random.Generator, n: int) -> PureState:
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState.normalized(a)


def random_density(rng: np.random.Generator, n: int) -> DensityOperator:
    # Ginibre construction: A A^dag / Tr is always a valid density matrix.
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = a @ a.conj().T
    return DensityOperator(n, m / np.trace(m))


def random_orthonormal_frame(rng: np.random.Generator, n: int) -> np.ndarray:
    """Columns form a Haar-ish random orthonormal basis of C^n."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))
