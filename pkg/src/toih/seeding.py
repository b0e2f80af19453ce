"""Named random sub-streams derived from one user-facing seed."""
import zlib

import numpy as np


def derive_seed(seed, name):
    """A 63-bit seed for sub-stream ``name``; stable across platforms and runs."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])
    return int.from_bytes(ss.generate_state(2, dtype=np.uint32).astype("<u4").tobytes(), "little") >> 1
