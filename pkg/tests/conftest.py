"""Shared fixtures for the curvlab test suite."""

import numpy as np
import pytest

from curvlab.core_algebra import PhaseState
from curvlab.diffobs import sample_states


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def states2():
    return sample_states(2, 20, seed=7)


@pytest.fixture
def states3():
    return sample_states(3, 20, seed=11)


def central_gradient(fn, x, step=1e-5):
    """Central finite-difference gradient of a numpy scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return grad


@pytest.fixture
def fd_gradient():
    return central_gradient


@pytest.fixture
def explicit_euler():
    """Non-symplectic reference integrator: x_{k+1} = x_k + dt X_H(x_k)."""
    from curvlab.dynamics import hamiltonian_field
    import jax

    def integrate(h, x0: PhaseState, dt: float, n_steps: int) -> np.ndarray:
        vector_field = jax.jit(hamiltonian_field(h))
        x = x0.vector()
        energies = [h(x0)]
        for _ in range(n_steps):
            x = x + dt * np.asarray(vector_field(x))
            energies.append(h(PhaseState.from_vector(x)))
        return np.array(energies)
    return integrate
