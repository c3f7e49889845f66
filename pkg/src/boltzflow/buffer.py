"""Bounded FIFO replay buffer of model-generated endpoint samples."""

from __future__ import annotations

import logging

import numpy as np

from .errors import DimensionError, EmptyBufferError

logger = logging.getLogger(__name__)


class ReplayBuffer:
    """Ring of d-vectors with FIFO eviction and uniform with-replacement draws.

    Non-finite rows are dropped on insert (counted in ``dropped_total``);
    everything stored is finite by construction.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._storage = np.empty((self.capacity, self.dim))
        self._next = 0
        self._size = 0
        self.dropped_total = 0

    def __len__(self) -> int:
        return self._size

    def push_batch(self, xs) -> int:
        """Insert rows oldest-first; evicts the oldest entries past capacity.
        Returns the number of rows actually inserted."""
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return 0
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise DimensionError(f"expected (B, {self.dim}) rows")
        finite = np.all(np.isfinite(xs), axis=1)
        n_bad = int(np.sum(~finite))
        if n_bad:
            self.dropped_total += n_bad
            logger.warning("replay buffer dropped %d non-finite rows", n_bad)
            xs = xs[finite]
        for row in xs:
            self._storage[self._next] = row
            self._next = (self._next + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)
        return xs.shape[0]

    def sample_batch(self, n: int, rng) -> np.ndarray:
        """Uniform with replacement over current contents."""
        if self._size == 0:
            raise EmptyBufferError("cannot sample from an empty buffer")
        n = int(n)
        if n == 0:
            return np.empty((0, self.dim))
        idx = rng.integers(0, self._size, size=n)
        return self.view()[idx].copy()

    def view(self) -> np.ndarray:
        """Current contents in insertion order (oldest first); copy-free slice
        when the ring has not wrapped."""
        if self._size < self.capacity:
            return self._storage[: self._size]
        return np.roll(self._storage, -self._next, axis=0)
