"""Stream-keyed random generators.

Every replica gets its own Philox generator derived from ``(seed, stream, *tags)``
through :class:`numpy.random.SeedSequence`. Draws therefore do not depend on the
order in which replicas are executed or on how they are spread over workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["generator", "SALT"]

# Distinct tags keep the matrix draw, the DBM noise and the probe vector of one
# replica independent from each other.
SALT = {"matrix": 0, "dbm": 1, "probe": 2, "sde": 3, "aux": 4}


def generator(seed: int, stream: int = 0, *tags: int | str) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream, *tags)``.

    String tags are mapped through :data:`SALT`.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    key = [int(stream)]
    for t in tags:
        key.append(SALT[t] if isinstance(t, str) else int(t))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))
