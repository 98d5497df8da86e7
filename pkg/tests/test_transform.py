import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swellcp.transform import TargetTransform, forward, inverse


def test_forward_examples():
    assert forward(0.0) == 0.0
    assert forward(math.e - 1) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        forward(-1.0)


def test_inverse_examples():
    assert inverse(0.0) == 0.0
    assert inverse(2.0) == pytest.approx(6.38905609893065, rel=1e-12)
    assert inverse(forward(3.2)) == pytest.approx(3.2, rel=1e-12)


def test_round_trip_log_grid():
    y = np.logspace(-12, 6, 4001)
    back = inverse(forward(y))
    assert np.max(np.abs(back - y) / y) < 1e-12
    assert inverse(forward(0.0)) == 0.0


def test_inverse_of_infinities():
    assert inverse(-math.inf) == -1.0
    assert inverse(math.inf) == math.inf


def test_offset_validation():
    with pytest.raises(ValueError):
        TargetTransform(0.0)
    t = TargetTransform(2.0)
    assert t.forward(0.0) == pytest.approx(math.log(2.0))
    assert t.inverse(t.forward(5.0)) == pytest.approx(5.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_increasing(a, b):
    if a < b:
        assert forward(a) <= forward(b)
    # strict once the gap is resolvable in double precision
    if b > a * (1 + 1e-12) + 1e-300:
        assert forward(a) < forward(b)
