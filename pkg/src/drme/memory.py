"""Fixed-capacity replay buffer maintained by reservoir sampling."""

from __future__ import annotations

import numpy as np

from .nnet import Batch
from .stream import Sample


class MemoryBuffer:
    """Uniform size-N reservoir over the stream seen so far.

    Holds raw stream samples only; evolved copies are never written back.
    The reservoir owns its RNG so buffer contents do not depend on what the
    rest of the run draws.
    """

    def __init__(self, capacity: int, rng: np.random.Generator | None = None):
        if capacity < 0:
            raise ValueError("capacity must be nonnegative")
        self.capacity = capacity
        self.items: list[Sample] = []
        self.seen = 0
        self.rng = rng if rng is not None else np.random.default_rng()

    def __len__(self) -> int:
        return len(self.items)

    def update(self, sample: Sample):
        """Offer one stream sample; kept with probability capacity/seen."""
        self.seen += 1
        if self.capacity == 0:
            return
        if len(self.items) < self.capacity:
            self.items.append(sample)
        else:
            j = int(self.rng.integers(self.seen))
            if j < self.capacity:
                self.items[j] = sample

    def sample_minibatch(self, b: int, rng: np.random.Generator) -> Batch:
        """min(b, len) items drawn uniformly without replacement, as copies.

        An empty buffer yields an empty batch; the caller skips replay.
        """
        if b < 1:
            raise ValueError("b must be positive")
        n = len(self.items)
        if n == 0:
            return Batch(inputs=np.zeros((0, 1)), labels=np.zeros(0, dtype=np.int64),
                         tasks=np.zeros(0, dtype=np.int64))
        idx = rng.choice(n, size=min(b, n), replace=False)
        picked = [self.items[i] for i in idx]
        return Batch(
            inputs=np.stack([s.x for s in picked]).copy(),
            labels=np.array([s.y for s in picked], dtype=np.int64),
            tasks=np.array([s.task for s in picked], dtype=np.int64),
        )
