import numpy as np

# fixed substream tags; never renumber, or seeded runs stop reproducing
STREAMS = {
    "benchmark": 0,
    "noise": 1,
    "gt": 2,
    "bo": 3,
    "random_search": 4,
    "placement": 5,
}


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    String keys are looked up in ``STREAMS``; integers are used as is.
    """
    spawn_key = tuple(STREAMS[k] if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))
