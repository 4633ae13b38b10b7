"""Counter-based, splittable random streams.

Every stream is keyed by ``(master_seed, label, index)``. The key is hashed
into a Philox counter-based generator, so a stream's output depends only on
its key and never on which other streams were drawn from, or in what order.
"""

from __future__ import annotations

import hashlib
import struct
import threading

import numpy as np

_UINT64_MAX = 2**64 - 1
_DOUBLE_UNIT = 2.0**-53
_scratch = threading.local()


def _philox_key(master_seed: int, label: str, index: int) -> int:
    digest = hashlib.blake2b(
        struct.pack("<QQ", master_seed, index) + label.encode("utf-8"),
        digest_size=16,
        person=b"qmuse-rngstream",
    ).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """An independent random stream identified by seed, label and index.

    >>> a = RngStream(7, "cell", 3)
    >>> b = RngStream(7, "cell", 3)
    >>> a.random() == b.random()
    True
    """

    __slots__ = ("master_seed", "label", "index", "_gen", "_skip")

    def __init__(self, master_seed: int, label: str = "root", index: int = 0):
        for name, value in (("master_seed", master_seed), ("index", index)):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= _UINT64_MAX:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
        self.master_seed = int(master_seed)
        self.label = str(label)
        self.index = int(index)
        self._gen = None
        self._skip = 0

    def derive(self, label: str, index: int = 0) -> RngStream:
        """Return a child stream; the parent's draw position is irrelevant."""
        if not 0 <= index <= _UINT64_MAX:
            raise ValueError(f"index must fit in an unsigned 64-bit integer, got {index}")
        child = object.__new__(RngStream)
        child.master_seed = self.master_seed
        child.label = f"{self.label}/{self.index}/{label}"
        child.index = int(index)
        child._gen = None
        child._skip = 0
        return child

    def _key_words(self) -> np.ndarray:
        k = _philox_key(self.master_seed, self.label, self.index)
        return np.array([k & _UINT64_MAX, k >> 64], dtype=np.uint64)

    @property
    def generator(self) -> np.random.Generator:
        # built on first draw; streams that only derive children never pay for it
        if self._gen is None:
            bitgen = np.random.Philox(key=_philox_key(self.master_seed, self.label, self.index))
            if self._skip:
                bitgen.random_raw(self._skip)
            self._gen = np.random.Generator(bitgen)
        return self._gen

    def _first_double(self) -> float:
        # Many streams make exactly one scalar draw. Re-keying a per-thread
        # Philox is much cheaper than building a Generator, and yields the
        # same value Generator.random() would: the top 53 bits of one word.
        bitgen = getattr(_scratch, "philox", None)
        if bitgen is None:
            bitgen = _scratch.philox = np.random.Philox(0)
        bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.zeros(4, dtype=np.uint64), "key": self._key_words()},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        self._skip = 1
        return (int(bitgen.random_raw()) >> 11) * _DOUBLE_UNIT

    def random(self, size=None):
        if size is None and self._gen is None and not self._skip:
            return self._first_double()
        return self.generator.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def multinomial(self, n, pvals):
        return self.generator.multinomial(n, pvals)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, label={self.label!r}, index={self.index})"
