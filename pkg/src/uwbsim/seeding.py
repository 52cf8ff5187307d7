"""Deterministic seed derivation.

Every random draw in the toolkit derives from a master seed plus a tuple of
role/index integers, mixed through numpy's SeedSequence.  Results are a
pure function of the tuple, so cell- and trial-level work can run in any
order (or on any thread count) without changing a single output bit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["seed_for", "STREAM_PHI", "STREAM_CHANNEL", "STREAM_NOISE", "STREAM_TAG"]

# stream ids keep unrelated draws on disjoint SeedSequence paths
STREAM_PHI = 1
STREAM_CHANNEL = 2
STREAM_NOISE = 3
STREAM_TAG = 4


def seed_for(*parts: int) -> np.random.SeedSequence:
    """SeedSequence for a (master_seed, stream, index...) tuple."""
    return np.random.SeedSequence([int(p) for p in parts])
