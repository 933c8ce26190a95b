"""Replicated set of sealed (immutable) address ranges."""
import bisect
from typing import Iterator, List, Tuple

from .errors import SealedObjectError


class SealedRegistry:
    """
    Disjoint, append-only set of sealed [addr, addr + len) ranges.

    Each node keeps a replica; replicas are kept in sync by seal notices.
    """

    def __init__(self):
        self._starts: List[int] = []
        self._ends: List[int] = []

    def __len__(self) -> int:
        return len(self._starts)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        for start, end in zip(self._starts, self._ends):
            yield start, end - start

    def add(self, addr: int, length: int) -> bool:
        """
        Seal a range.

        Returns:
            False if exactly this range was already sealed, True otherwise

        Raises:
            ValueError: If the range partially overlaps a sealed one
        """
        if length <= 0:
            raise ValueError(f"Sealed range must be non-empty, got length {length}")
        index = bisect.bisect_left(self._starts, addr)
        if index < len(self._starts) and self._starts[index] == addr and self._ends[index] == addr + length:
            return False
        if self.overlaps(addr, length):
            raise ValueError(f"Range [{addr}, {addr + length}) overlaps an existing sealed range")
        self._starts.insert(index, addr)
        self._ends.insert(index, addr + length)
        return True

    def overlaps(self, addr: int, length: int) -> bool:
        if length <= 0 or not self._starts:
            return False
        end = addr + length
        index = bisect.bisect_right(self._starts, addr)
        if index > 0 and self._ends[index - 1] > addr:
            return True
        return index < len(self._starts) and self._starts[index] < end

    def check_write(self, addr: int, length: int) -> None:
        """Raise SealedObjectError if a write of the range would touch a sealed object."""
        if self.overlaps(addr, length):
            raise SealedObjectError(f"Write to [{addr}, {addr + length}) overlaps a sealed object")

    def ranges(self) -> List[Tuple[int, int]]:
        return list(self)
