import math

import pytest

from aoi_multicast import validate


@pytest.fixture
def reference_params():
    """The workhorse parameter point used across the validation suite."""
    return validate(10, 7, 1 / 3, 0.1, 3.0)


@pytest.fixture
def reference_params_no_deadline():
    return validate(10, 7, 1 / 3, 0.1, math.inf)


@pytest.fixture
def unicast_params():
    return validate(1, 1, 1.0, 0.1, 2.0)
