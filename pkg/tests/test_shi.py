import numpy as np
import pytest
from hypothesis import given, strategies as st

from smokedet.errors import ContractError, InvalidConfigError
from smokedet.shi import ShiMap, decide_and_update


def _run(dets, t_max=15, threshold=10):
    shi = ShiMap((1, 1), t_max, threshold)
    finals, counters = [], []
    for d in dets:
        final, shi = decide_and_update(shi, np.array([[d]]))
        finals.append(bool(final[0, 0]))
        counters.append(int(shi.counters[0, 0]))
    return finals, counters


def test_consecutive_detections():
    finals, counters = _run([True] * 4)
    assert finals == [False, True, True, True]
    assert counters == [15, 15, 15, 15]


def test_decay_and_gap():
    # after a detection the counter decays; it stays >= 10 for five misses
    finals, counters = _run([True] + [False] * 5 + [True] + [False] * 6 + [True])
    assert counters[:6] == [15, 14, 13, 12, 11, 10]
    assert finals[6] is True
    assert counters[7:13] == [14, 13, 12, 11, 10, 9]
    assert finals[13] is False


def test_never_alarms_without_detection():
    finals, counters = _run([False] * 20)
    assert not any(finals) and counters == [0] * 20


def test_input_untouched():
    shi = ShiMap((2, 2))
    before = shi.counters.copy()
    decide_and_update(shi, np.ones((2, 2), bool))
    np.testing.assert_array_equal(shi.counters, before)


def test_contracts():
    with pytest.raises(ContractError):
        decide_and_update(ShiMap((2, 2)), np.ones((3, 2), bool))
    with pytest.raises(InvalidConfigError):
        ShiMap((2, 2), t_max=5, threshold=6)
    with pytest.raises(InvalidConfigError):
        ShiMap((2, 2), t_max=5, threshold=0)


def test_image_scaling():
    shi = ShiMap((1, 2))
    _, shi = decide_and_update(shi, np.array([[True, False]]))
    np.testing.assert_array_equal(shi.to_image(), [[255, 0]])


@given(st.lists(st.booleans(), min_size=1, max_size=60), st.integers(1, 20), st.data())
def test_invariants(dets, t_max, data):
    threshold = data.draw(st.integers(1, t_max))
    finals, counters = _run(dets, t_max, threshold)
    assert all(0 <= c <= t_max for c in counters)
    for k, f in enumerate(finals):
        # alarm iff detected now and also within the previous t_max - threshold + 1 frames
        assert f == (dets[k] and any(dets[max(0, k - (t_max - threshold + 1)):k]))


@given(st.lists(st.booleans(), min_size=1, max_size=60), st.data())
def test_raising_threshold_never_adds_alarms(dets, data):
    t_max = data.draw(st.integers(2, 20))
    lo = data.draw(st.integers(1, t_max - 1))
    hi = data.draw(st.integers(lo + 1, t_max))
    a, _ = _run(dets, t_max, lo)
    b, _ = _run(dets, t_max, hi)
    assert all(x or not y for x, y in zip(a, b))
    assert all(d or not f for d, f in zip(dets, a))
