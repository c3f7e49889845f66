import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import boltzflow as bf
from boltzflow.errors import EmptyBufferError


class TestPushBatch:
    def test_fifo_eviction(self):
        buf = bf.ReplayBuffer(3, 1)
        buf.push_batch(np.arange(5.0)[:, None])
        np.testing.assert_array_equal(buf.view().ravel(), [2.0, 3.0, 4.0])

    def test_empty_push_is_noop(self):
        buf = bf.ReplayBuffer(3, 2)
        buf.push_batch(np.ones((1, 2)))
        assert buf.push_batch(np.empty((0, 2))) == 0
        assert len(buf) == 1

    def test_nan_rows_dropped_and_counted(self):
        buf = bf.ReplayBuffer(10, 2)
        xs = np.ones((4, 2))
        xs[2, 0] = np.nan
        pushed = buf.push_batch(xs)
        assert pushed == 3
        assert len(buf) == 3
        assert buf.dropped_total == 1

    def test_inf_rows_dropped(self):
        buf = bf.ReplayBuffer(10, 2)
        xs = np.ones((2, 2))
        xs[0, 1] = np.inf
        buf.push_batch(xs)
        assert len(buf) == 1 and buf.dropped_total == 1


class TestSampleBatch:
    def test_single_element_buffer(self, rng):
        buf = bf.ReplayBuffer(4, 2)
        row = np.array([[1.5, -2.5]])
        buf.push_batch(row)
        out = buf.sample_batch(7, rng)
        np.testing.assert_array_equal(out, np.tile(row, (7, 1)))

    def test_empty_request(self, rng):
        buf = bf.ReplayBuffer(4, 2)
        buf.push_batch(np.ones((2, 2)))
        assert buf.sample_batch(0, rng).shape == (0, 2)

    def test_empty_buffer_raises(self, rng):
        with pytest.raises(EmptyBufferError):
            bf.ReplayBuffer(4, 2).sample_batch(1, rng)

    def test_uniformity(self):
        buf = bf.ReplayBuffer(10, 1)
        buf.push_batch(np.arange(10.0)[:, None])
        n = 10**5
        draws = buf.sample_batch(n, np.random.default_rng(2)).ravel()
        freq = np.bincount(draws.astype(int), minlength=10) / n
        bound = 3 * np.sqrt(0.1 * 0.9 / n)
        assert np.all(np.abs(freq - 0.1) <= bound)


class TestFifoModel:
    @given(st.lists(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=7),
                    min_size=0, max_size=20),
           st.integers(1, 8))
    @settings(max_examples=100, deadline=None)
    def test_matches_list_model(self, batches, capacity):
        buf = bf.ReplayBuffer(capacity, 1)
        model = []
        for batch in batches:
            rows = np.array(batch, dtype=float)[:, None]
            buf.push_batch(rows)
            model.extend(batch)
            model = model[-capacity:]
            assert len(buf) == len(model)
            np.testing.assert_array_equal(buf.view().ravel(), model)
            assert np.all(np.isfinite(buf.view()))
