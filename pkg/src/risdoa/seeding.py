"""Deterministic seed derivation for nested experiment loops."""

import numpy as np

_MASK = (1 << 32) - 1


def child_seed(master: int, *path: int) -> int:
    """Derive a stable child seed from a master seed and an index path.

    Children are keyed by the path alone, so extending a sweep along one
    axis (more trials, more SNR points) never perturbs seeds already issued
    for other indices.
    """
    key = tuple(int(p) & _MASK for p in path)
    seq = np.random.SeedSequence(int(master) & _MASK, spawn_key=key)
    return int(seq.generate_state(1, np.uint64)[0])
