import numpy as np


def derive_seed(*keys: int) -> int:
    """Independent 63-bit seed from a tuple of integer keys (master seed first)."""
    return int(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]).generate_state(2, np.uint64)[0] >> 1)
