from collections.abc import Iterable

import numpy as np

__all__ = ("derive_seed", "make_rng", "RandomStream")


def _seed_sequence(seed: int, keys: Iterable[int]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Return a PCG64 generator for the sub-stream `keys` of the root `seed`.

    The sub-stream is selected by hashing (seed, keys) through `numpy.random.SeedSequence`,
    so the same (seed, keys) pair yields the same numbers on every platform and in every process.
    An empty `keys` tuple is the root stream itself.
    """
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """Return a 63-bit integer seed for the sub-stream `keys` of `seed`, suitable for recording in reports."""
    state = _seed_sequence(seed, keys).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))


class RandomStream:
    """
    A named root seed handing out reproducible sub-streams.

    Experiments give every trial its own sub-stream, keyed by the trial's coordinates,
    so serial and parallel runs draw identical numbers.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def rng(self, *keys: int) -> np.random.Generator:
        """Generator for the sub-stream `keys`."""
        return make_rng(self.seed, *keys)

    def seed_for(self, *keys: int) -> int:
        """Integer seed for the sub-stream `keys`."""
        return derive_seed(self.seed, *keys)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed})"
