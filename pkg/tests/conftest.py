import numpy as np
import pytest
from hypothesis import strategies as st

from geoswarm.manifold import PotentialField

ALL_KINDS = ("flat", "elliptic_paraboloid", "hyperbolic_paraboloid", "sincos")

coord = st.floats(min_value=-8.0, max_value=8.0, allow_nan=False, allow_infinity=False)
points = st.tuples(coord, coord).map(np.array)
shape_a = st.sampled_from([2.0, 4.0, 8.0, 20.0])
kinds = st.sampled_from(ALL_KINDS)
fields = st.builds(PotentialField, kinds, shape_a)


@pytest.fixture
def flat():
    return PotentialField("flat", 1.0)


@pytest.fixture
def ell20():
    return PotentialField("elliptic_paraboloid", 20.0)


@pytest.fixture
def hyp20():
    return PotentialField("hyperbolic_paraboloid", 20.0)


@pytest.fixture
def sincos2():
    return PotentialField("sincos", 2.0)
