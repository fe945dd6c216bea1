import math
from dataclasses import FrozenInstanceError

import pytest
from hypothesis import given, strategies as st

from aoi_multicast import (
    DeadlineNotAboveShift,
    NonPositiveRate,
    NonPositiveShift,
    QuorumOutOfRange,
    SystemParams,
    validate,
)


def test_reference_point_is_valid():
    p = validate(10, 7, 1 / 3, 0.1, 3.0)
    assert (p.n_devices, p.k_quorum) == (10, 7)
    assert p.rate == pytest.approx(1 / 3)
    assert not p.no_deadline


def test_unicast_no_deadline_boundary():
    p = validate(1, 1, 1.0, 0.1, math.inf)
    assert p.no_deadline
    assert p.k_quorum == p.n_devices == 1


def test_deadline_at_or_below_shift_rejected():
    with pytest.raises(DeadlineNotAboveShift):
        validate(10, 7, 1 / 3, 0.1, 0.05)
    with pytest.raises(DeadlineNotAboveShift):
        validate(10, 7, 1 / 3, 0.1, 0.1)


@pytest.mark.parametrize("k", [0, -1, 11])
def test_quorum_out_of_range(k):
    with pytest.raises(QuorumOutOfRange):
        validate(10, k, 1.0, 0.1, 3.0)


@pytest.mark.parametrize("rate", [0.0, -1.0, math.nan, math.inf])
def test_bad_rate(rate):
    with pytest.raises(NonPositiveRate):
        validate(10, 7, rate, 0.1, 3.0)


@pytest.mark.parametrize("shift", [0.0, -0.1, math.nan, math.inf])
def test_bad_shift(shift):
    with pytest.raises(NonPositiveShift):
        validate(10, 7, 1.0, shift, 3.0)


def test_nan_and_nonpositive_deadline_rejected():
    for bad in (math.nan, 0.0, -1.0):
        with pytest.raises(DeadlineNotAboveShift):
            validate(10, 7, 1.0, 0.1, bad)


def test_non_integral_counts_rejected():
    with pytest.raises(QuorumOutOfRange):
        validate(10.5, 7, 1.0, 0.1, 3.0)
    with pytest.raises(QuorumOutOfRange):
        validate(10, 6.5, 1.0, 0.1, 3.0)


def test_validate_idempotent():
    p = validate(10, 7, 1 / 3, 0.1, 3.0)
    again = validate(p.n_devices, p.k_quorum, p.rate, p.shift, p.deadline)
    assert again == p


def test_immutable():
    p = validate(10, 7, 1 / 3, 0.1, 3.0)
    with pytest.raises(FrozenInstanceError):
        p.rate = 2.0


@given(
    n=st.integers(min_value=-2, max_value=15),
    k=st.integers(min_value=-2, max_value=20),
    rate=st.floats(min_value=-1.0, max_value=5.0, allow_nan=False),
    shift=st.floats(min_value=-0.5, max_value=2.0, allow_nan=False),
    deadline=st.one_of(
        st.floats(min_value=-1.0, max_value=25.0, allow_nan=False),
        st.just(math.inf),
    ),
)
def test_validate_accepts_exactly_the_invariant_set(n, k, rate, shift, deadline):
    ok = (
        n >= 1
        and 1 <= k <= n
        and rate > 0
        and shift > 0
        and deadline > 0
        and (math.isinf(deadline) or deadline > shift)
    )
    if ok:
        p = validate(n, k, rate, shift, deadline)
        assert isinstance(p, SystemParams)
    else:
        with pytest.raises(
            (QuorumOutOfRange, NonPositiveRate, NonPositiveShift, DeadlineNotAboveShift)
        ):
            validate(n, k, rate, shift, deadline)
