"""Stable seed derivation so every stage and item gets its own RNG stream."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: object) -> int:
    """Derive a child seed from a master seed and any hashable path of parts.

    Uses SHA-256 over a canonical string, so the result is stable across
    processes and platforms (unlike ``hash()``).
    """
    text = ":".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
