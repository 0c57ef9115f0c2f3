import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from timebinsim.state import Label, MultiPhotonState, Pol, norm_squared

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
angles = st.floats(0.0, 2 * math.pi, allow_nan=False)


@st.composite
def unit_pairs(draw):
    """A random normalized pair of complex coefficients."""
    v = np.array([complex(draw(finite), draw(finite)) for _ in range(2)])
    nrm = np.linalg.norm(v)
    if nrm < 1e-3:
        return 1.0 + 0j, 0j
    v = v / nrm
    return complex(v[0]), complex(v[1])


@st.composite
def sparse_states(draw, rails=("a", "b"), times=(0, 1, 2), normalized=True):
    """A random single-photon state over the given rails."""
    labels = [Label(r, p, t) for r in rails for p in Pol for t in times]
    chosen = draw(st.lists(st.sampled_from(labels), min_size=1, max_size=len(labels), unique=True))
    terms = {(lab,): complex(draw(finite), draw(finite)) for lab in chosen}
    s = MultiPhotonState(terms, n=1)
    if normalized:
        nrm = norm_squared(s)
        if nrm < 1e-6:
            return MultiPhotonState({(chosen[0],): 1.0})
        s = s * (1 / math.sqrt(nrm))
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
