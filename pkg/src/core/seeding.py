"""
Seed derivation for reproducible parallel runs.

Every random task draws from SeedSequence(master, spawn_key=(stream, index)),
so a task's randomness depends only on its own identity.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Independent random streams of one master seed."""
    DATA = 0
    TREE = 1
    ANCHOR = 2
    HAJEK_REP = 3
    COOCCUR = 4
    KERNEL_X = 5
    KERNEL_X_BAR = 6
    COUPLING = 7
    TRIAL = 8
    HOEFFDING = 9


def seed_sequence(seed: int, stream: Stream, *index: int) -> np.random.SeedSequence:
    """Seed sequence of item ``index`` on ``stream``."""
    return np.random.SeedSequence(seed, spawn_key=(int(stream), *(int(i) for i in index)))


def task_rngs(seed: int, stream: Stream, *index: int):
    """
    Two independent generators for one task.

    The first draws data (subsamples, fresh points); the second drives the
    tree randomization, so changing how data are drawn never changes the
    coin flips.
    """
    data_seq, coin_seq = seed_sequence(seed, stream, *index).spawn(2)
    return np.random.default_rng(data_seq), coin_seq
