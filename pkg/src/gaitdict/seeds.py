"""Stable seed derivation.

All randomness in a run flows from one master seed through `derive_seed`,
so any task (a training cell, a synthetic recording) is reproducible in
isolation. Python's builtin `hash` is salted per process; we hash through
sha256 instead so derived seeds are stable across runs and machines.
"""

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Derive a 63-bit seed from a master seed and a task identity.

    Parts may be strings, ints, or floats; they are joined into a canonical
    text key before hashing, so the same identity always yields the same seed.
    """
    key = f"{master}|" + "|".join(_canon(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _canon(part) -> str:
    if isinstance(part, float):
        return repr(part)
    return str(part)
