import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bsblfm.metrics import DistortionReport, prd, repeat_timing, time_op


def test_prd_examples():
    x = np.array([3.0, 4.0])
    assert prd(x, x) == 0.0
    assert prd(x, np.zeros(2)) == 100.0
    assert prd(x, [3.0, 0.0]) == pytest.approx(80.0)


def test_prd_rejects():
    with pytest.raises(ValueError):
        prd(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        prd(np.ones(3), np.ones(4))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(arrays(float, 16, elements=finite), arrays(float, 16, elements=finite),
       st.floats(1e-3, 1e3).flatmap(lambda c: st.sampled_from([c, -c])))
def test_prd_scale_invariant(x, x_hat, c):
    if np.linalg.norm(x) < 1e-6:
        return
    assert prd(c * x, c * x_hat) == pytest.approx(prd(x, x_hat), rel=1e-9, abs=1e-9)
    assert prd(x, x_hat) >= 0


def test_distortion_report():
    rep = DistortionReport.compute([1.0, 0.0], [1.0, 0.0], packet_index=3)
    assert rep.prd == 0 and rep.n == 2 and rep.packet_index == 3


def test_time_op():
    result, seconds = time_op(lambda: 42)
    assert result == 42 and seconds >= 0
    _, slept = time_op(lambda: time.sleep(0.01))
    assert slept >= 0.009


def test_repeat_timing():
    calls = []
    result, timing = repeat_timing(lambda: calls.append(1) or len(calls), runs=5)
    assert result == 5 and timing.runs == 5
    assert timing.median >= 0 and timing.mean >= 0
    with pytest.raises(ValueError):
        repeat_timing(lambda: None, runs=0)
