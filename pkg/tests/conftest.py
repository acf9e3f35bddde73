import numpy as np
import pytest

import temperlab as tl
from temperlab.tempering import TemperingConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def two_mode_4_2():
    """K=2, d=2, D=4 quadratic instance with its auto-built ladder."""
    spec = tl.two_mode_spec(4.0, 2)
    ladder = tl.build_ladder(1.0, 1.0, 2, 4.0)
    return spec, ladder


@pytest.fixture
def rwm_config():
    return TemperingConfig(proposal_kind="rwm", h=0.5, alpha=0.5, q_adj=0.5,
                           lazy=True, seed=90210)


def random_spec(rng, K=None, d=None, diag=False):
    """Random quadratic mixture spec with modes in a ball."""
    K = K or int(rng.integers(1, 4))
    d = d or int(rng.integers(1, 5))
    w = rng.dirichlet(np.ones(K) * 3.0)
    modes = rng.uniform(-3.0, 3.0, size=(K, d))
    if diag:
        a = rng.uniform(0.5, 2.5, size=d)
        local = tl.diag_quadratic_potential(a)
    else:
        local = tl.quadratic_potential(d)
    return tl.MixtureSpec(w, modes, local)
