import numpy as np
import pytest

from ewens_pitman.rng import PhiloxStream


@pytest.mark.parametrize("seed,index,lane", [(0, 0, 0), (12345, 7, 0), (2**63 + 5, 2**40, 1)])
def test_matches_numpy_philox(seed, index, lane):
    ours = PhiloxStream(seed, index, lane).raw(37)
    key = np.array([seed, index], dtype=np.uint64)
    ctr = np.array([0, lane, 0, 0], dtype=np.uint64)
    ref = np.random.Philox(key=key, counter=ctr).random_raw(37)
    np.testing.assert_array_equal(ours, ref.astype(np.uint64))


def test_uniforms_in_unit_interval_and_reproducible():
    a = [PhiloxStream(3, 1).random() for _ in range(1)]
    s1, s2 = PhiloxStream(3, 1), PhiloxStream(3, 1)
    u1 = np.array([s1.random() for _ in range(1000)])
    u2 = np.array([s2.random() for _ in range(1000)])
    np.testing.assert_array_equal(u1, u2)
    assert a[0] == u1[0]
    assert u1.min() >= 0.0 and u1.max() < 1.0
    assert abs(u1.mean() - 0.5) < 4 * np.sqrt(1 / 12 / 1000)


def test_streams_differ_by_index_and_lane():
    base = PhiloxStream(9, 0, 0).raw(8)
    assert not np.array_equal(base, PhiloxStream(9, 1, 0).raw(8))
    assert not np.array_equal(base, PhiloxStream(9, 0, 1).raw(8))


def test_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        PhiloxStream(-1)
    with pytest.raises(ValueError):
        PhiloxStream(2**64)
