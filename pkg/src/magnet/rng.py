"""Seeded, labelled random streams.

Every source of randomness in the package draws from an RngStream so that a
run is fully determined by its seed list.  Streams are identified by a
(seed, label) pair; equal pairs always produce equal draw sequences, and
child streams derive their state from the parent label path, never from
global state.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A named, reproducible random stream backed by a numpy Generator."""

    def __init__(self, seed: int, label: str = ""):
        self.seed = int(seed)
        self.label = label
        self._generator: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, _label_entropy(self.label)])
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator

    def child(self, label: str) -> "RngStream":
        """A fresh independent stream under this stream's label path."""
        path = f"{self.label}/{label}" if self.label else label
        return RngStream(self.seed, path)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"
