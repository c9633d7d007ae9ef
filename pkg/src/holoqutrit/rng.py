"""Counter-based random substreams.

Every consumer derives its generator from ``(master seed, stream, counter)``,
so trial ``i`` sees the same numbers whichever worker runs it.
"""
from __future__ import annotations

import numpy as np

STREAMS = {"noise": 1, "shots": 2, "measure": 3, "setup": 4}


def substream(seed: int, stream: str, counter: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=(STREAMS[stream], int(counter)))
    return np.random.Generator(np.random.Philox(ss))
