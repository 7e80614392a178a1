"""Counter-based random streams.

Every stream is a Philox generator keyed by the master seed plus a spawn key
``(t_index, rep, purpose)``, so the numbers an episode sees depend only on its
coordinates and never on execution order or worker count.
"""

from __future__ import annotations

import numpy as np

# purpose tags are part of the key; never renumber
PURPOSES = {
    "env": 0,
    "policy": 1,
    "instance": 2,
    "concentration": 3,
    "kl": 4,
    "suite": 5,
}


def _seed_sequence(seed: int, t_index: int, rep: int, purpose: str) -> np.random.SeedSequence:
    try:
        tag = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown stream purpose {purpose!r}") from None
    if seed < 0 or t_index < 0 or rep < 0:
        raise ValueError("seed, t_index and rep must be non-negative")
    return np.random.SeedSequence(entropy=seed, spawn_key=(t_index, rep, tag))


def stream(seed: int, t_index: int = 0, rep: int = 0, purpose: str = "env") -> np.random.Generator:
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, t_index, rep, purpose)))


def stream_key(seed: int, t_index: int = 0, rep: int = 0, purpose: str = "env") -> tuple[int, int]:
    """The two 64-bit words of the Philox key behind ``stream(...)``."""
    bitgen = np.random.Philox(_seed_sequence(seed, t_index, rep, purpose))
    key = bitgen.state["state"]["key"]
    return int(key[0]), int(key[1])
