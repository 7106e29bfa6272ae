import numpy as np


def seed_random_state(seed):
    """Turn seed into np.random.RandomState instance

    Integers of any size are accepted; they are expanded through a
    SeedSequence so derived 64-bit sub-seeds stay usable.
    """
    if seed is None:
        return np.random.RandomState()
    elif isinstance(seed, (int, np.integer)):
        return np.random.RandomState(
            np.random.MT19937(np.random.SeedSequence(int(seed))))
    elif isinstance(seed, np.random.RandomState):
        return seed
    raise ValueError("%r can not be used to generate numpy.random.RandomState"
                     " instance" % seed)


def derive_seed(*keys) -> int:
    """Deterministic 64-bit sub-seed for a tuple of non-negative integer keys."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)
    return int(state[0])
