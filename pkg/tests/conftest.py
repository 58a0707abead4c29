import numpy as np
import pytest

from spectral_hmm import Hmm, hmm_a, identity_hmm


@pytest.fixture
def hmmA():
    return hmm_a()


@pytest.fixture
def ident():
    """Deterministic chain started in state 0."""
    return identity_hmm(2)


@pytest.fixture
def ident_half():
    """Deterministic chain with a uniform start; its Sigma is invertible."""
    return identity_hmm(2, pi=[0.5, 0.5])


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# Two-state fixtures whose exact moments under a rotated identity projection
# have Lambda > 0.01 and sigma_m > 0.3.
WELL_CONDITIONED = [
    (Hmm([[0.95, 0.04], [0.05, 0.96]], [[0.99, 0.01], [0.01, 0.99]], [0.4, 0.6]), 1.2),
    (Hmm([[0.97, 0.02], [0.03, 0.98]], [[0.995, 0.01], [0.005, 0.99]], [0.65, 0.35]), 0.4),
]
