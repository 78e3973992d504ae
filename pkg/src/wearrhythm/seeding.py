"""Stable seed derivation so every stage draws from its own reproducible stream."""

import hashlib


def derive_seed(seed: int, *keys) -> int:
    """64-bit seed from a master seed and any string-able keys (process independent)."""
    text = "\x1f".join([str(int(seed))] + [str(k) for k in keys])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")
