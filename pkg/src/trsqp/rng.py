"""Deterministic, splittable random streams.

Every random draw in a solver run is keyed by ``(seed, *path)`` where the
path names the iteration and the purpose of the draw (e.g. ``(4, "grad")``).
Streams are pure values: deriving a generator from the same key always
reproduces the same draws, independent of call order. This is what makes
trajectories bitwise reproducible and lets two evaluations share a sample
set by sharing a key.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["RngStream"]


def _digest(parts: tuple) -> int:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """A keyed source of ``numpy.random.Generator`` objects.

    Parameters
    ----------
    seed : int
        Run-level seed.
    path : tuple, optional
        Key components appended by :meth:`child`.
    """

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)

    def child(self, *parts) -> "RngStream":
        """Derive a sub-stream keyed by extra path components (ints or strings)."""
        return RngStream(self.seed, self.path + tuple(parts))

    def generator(self) -> np.random.Generator:
        """A fresh generator for this key. Same key, same draws."""
        key = _digest((self.seed,) + self.path)
        return np.random.Generator(np.random.Philox(key=key))

    def point_generator(self, x: np.ndarray) -> np.random.Generator:
        """A generator keyed by this stream *and* the evaluation point.

        Folding the point into the key makes noise draws at bit-identical
        points identical, and draws at distinct points independent, while a
        shared parent key still identifies one logical sample set.
        """
        x = np.ascontiguousarray(x, dtype=np.float64)
        xdig = hashlib.blake2b(x.tobytes(), digest_size=16).hexdigest()
        key = _digest((self.seed,) + self.path + (xdig,))
        return np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed}, path={self.path!r})"
