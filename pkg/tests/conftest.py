import os

import hypothesis
import numpy as np
import pytest

from matrix_core import StabilityConstraints, random_commuting_triple

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None, print_blob=True)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

NARROW = StabilityConstraints(imag_spread=0.1)


@pytest.fixture
def triple2():
    """A fixed 2×2 commuting family with Q, R, R−Q margins of at least 0.1."""
    return random_commuting_triple(2024, 2, NARROW)


@pytest.fixture
def triple3():
    return random_commuting_triple(7, 3, NARROW)
