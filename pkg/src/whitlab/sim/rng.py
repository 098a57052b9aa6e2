"""
Counter-based random streams.

A stream is named by (seed, stream_id). Its generator is Philox keyed by a
SeedSequence whose spawn key is the stream id, so the draws of one stream
depend only on those two integers and never on which worker runs it.
"""
from dataclasses import dataclass

import numpy as np

MASK_64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by a seed and a stream id."""
    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= MASK_64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream_id <= MASK_64:
            raise ValueError(f"Stream id must be a 64-bit unsigned integer, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(sequence))

    def substream(self, index: int) -> 'RngStream':
        """Stream for the index-th independent unit of work under this one."""
        return RngStream(self.seed, (self.stream_id * 1_000_003 + index + 1) & MASK_64)
