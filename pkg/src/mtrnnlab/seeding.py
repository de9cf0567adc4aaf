"""Deterministic random streams derived from one master seed.

Every consumer draws from its own stream, identified by a short integer
path, so sweeps over seeds stay comparable cell by cell.  Streams use a
counter-based bit generator.

Reserved paths: (101,) dataset jitter, (102,) dataset split,
(201..204) network/associator parameter init, (211..213) context-state
init, (301,) fold derivation.
"""

import numpy as np


def seed_stream(master: int, *path: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seed=seq))


def derive_seed(master: int, *path: int) -> int:
    """A fresh integer seed for a sub-experiment (sweep cell, fold)."""
    seq = np.random.SeedSequence(entropy=master, spawn_key=tuple(path))
    return int(seq.generate_state(1, np.uint32)[0])
