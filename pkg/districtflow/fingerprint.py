"""
Convenience class for plan fingerprints.

A fingerprint is the district label sequence in vertex-id order. It is stored as raw bytes
(one byte per vertex, so at most 255 districts) which makes it exact, hashable and cheap to
compare. A blake2b digest is available for display, file names and salted tie-breaking.
"""

import hashlib
from functools import cached_property

MAX_DISTRICTS = 255


class PlanKey:
    """Convenience class to manage the representations of a plan fingerprint."""

    def __init__(self, value):
        # type: (bytes|str|list[int]|tuple[int, ...]|PlanKey) -> None
        """Initialize from raw bytes, a hex string, a label sequence or another PlanKey."""
        if isinstance(value, PlanKey):
            raw = value._bytes
        elif isinstance(value, bytes):
            raw = value
        elif isinstance(value, str):
            try:
                raw = bytes.fromhex(value)
            except ValueError as e:
                raise ValueError(f"Can´t initialize `PlanKey` from string {value!r}") from e
        elif isinstance(value, (list, tuple)):
            if any(not 0 <= label <= MAX_DISTRICTS for label in value):
                raise ValueError(f"Labels must be between 0 and {MAX_DISTRICTS}")
            raw = bytes(value)
        else:
            raise ValueError(f"Can´t initialize `PlanKey` from type {type(value)}")
        self._bytes: bytes = raw

    def __str__(self):
        # type: () -> str
        """Hex representation of the label sequence."""
        return self._bytes.hex()

    def __repr__(self):
        # type: () -> str
        return f"PlanKey('{self}')"

    def __bytes__(self):
        return self._bytes

    def __len__(self):
        # type: () -> int
        return len(self._bytes)

    @cached_property
    def labels(self):
        # type: () -> tuple[int, ...]
        """District labels in vertex-id order."""
        return tuple(self._bytes)

    @cached_property
    def digest(self):
        # type: () -> str
        """Short blake2b digest for display."""
        return hashlib.blake2b(self._bytes, digest_size=8).hexdigest()

    def with_label(self, vertex, label):
        # type: (int, int) -> PlanKey
        """Fingerprint of the plan with a single vertex relabeled."""
        raw = bytearray(self._bytes)
        raw[vertex] = label
        return PlanKey(bytes(raw))

    def __eq__(self, other):
        # type: (object) -> bool
        """Check equality based on the label bytes."""
        if isinstance(other, PlanKey):
            return self._bytes == other._bytes
        return NotImplemented

    def __lt__(self, other):
        # type: (PlanKey) -> bool
        """Canonical order: lexicographic over labels."""
        return self._bytes < other._bytes

    def __hash__(self):
        # type: () -> int
        return hash(self._bytes)


def pair_bit(key_a, key_b, salt):
    # type: (PlanKey, PlanKey, int) -> int
    """
    Salted hash bit of an unordered pair of fingerprints.

    :return: 0 or 1, identical for (a, b) and (b, a)
    """
    low, high = sorted((bytes(key_a), bytes(key_b)))
    h = hashlib.blake2b(low + b"|" + high, digest_size=1, key=(salt % 2**64).to_bytes(8, "big"))
    return h.digest()[0] & 1


if __name__ == "__main__":
    key = PlanKey([1, 1, 2, 2])
    print(key, key.digest, key.labels, key.with_label(2, 1))
