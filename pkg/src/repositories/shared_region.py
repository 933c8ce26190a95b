"""Owner-managed first-fit allocator over a shared-memory region."""
import bisect
import json
import logging
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from ..config.settings import Settings
from ..models.allocation import AllocRecord, round_up_lines
from ..models.errors import InvalidFreeError, OutOfMemoryError, RegionError, SealedObjectError
from ..models.ledger import EventKind
from ..models.memory import SegmentMap

if TYPE_CHECKING:
    from ..models.ledger import CostLedger


logger = logging.getLogger(__name__)


class Region:
    """
    Custom memory region handed to the owner node's allocator.

    Metadata lives on the owner only; other nodes reach the region through
    allocation messages. Every allocation is rounded up to whole cache lines
    so no two objects share a line.

    Attributes:
        owner: Node whose segment holds the region
        base: First global address of the region
        size: Region length in bytes
        free_list: Sorted (offset, length) spans, offsets relative to base
        allocations: Live allocations keyed by global address
    """

    def __init__(self, owner: int, base: int, size: int,
                 segment_map: Optional[SegmentMap] = None,
                 ledger: Optional['CostLedger'] = None):
        """
        Create a region with a single free span covering all of it.

        Args:
            owner: Owner node id
            base: Region base address (multiple of the line size)
            size: Region size (multiple of the line size, > 0)
            segment_map: When given, the region must lie inside the owner's segment
            ledger: When given, alloc/free events are recorded against the owner

        Raises:
            RegionError: If the region is empty, misaligned or outside the segment
        """
        line = segment_map.line_size if segment_map else Settings.CACHE_LINE_SIZE
        if size <= 0:
            raise RegionError("Region is empty")
        if base % line or size % line:
            raise RegionError(f"Region misaligned: base={base}, size={size}, line={line}")
        if segment_map is not None:
            try:
                segment = segment_map.segment_of(owner)
            except KeyError:
                raise RegionError(f"Node {owner} owns no segment")
            if not segment.contains(base, size):
                raise RegionError(
                    f"Region [{base}, {base + size}) is outside node {owner}'s segment "
                    f"[{segment.base}, {segment.end})")

        self.owner = owner
        self.base = base
        self.size = size
        self.line_size = line
        self.ledger = ledger
        self.free_list: List[Tuple[int, int]] = [(0, size)]
        self.allocations: Dict[int, AllocRecord] = {}
        logger.debug(f"Region created: owner={owner}, base={base}, size={size}")

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end

    def alloc(self, size: int) -> int:
        """
        First-fit allocation.

        Args:
            size: Requested bytes (> 0)

        Returns:
            Global address of the allocation (line aligned)

        Raises:
            ValueError: If size is not positive
            OutOfMemoryError: If no free span is large enough
        """
        if size <= 0:
            raise ValueError(f"Allocation size must be positive, got {size}")
        reserved = round_up_lines(size, self.line_size)
        for index, (offset, length) in enumerate(self.free_list):
            if length < reserved:
                continue
            if length == reserved:
                del self.free_list[index]
            else:
                self.free_list[index] = (offset + reserved, length - reserved)
            addr = self.base + offset
            self.allocations[addr] = AllocRecord(addr=addr, requested=size, reserved=reserved)
            self._record(EventKind.ALLOC, addr, reserved)
            return addr
        raise OutOfMemoryError(
            f"Region of node {self.owner} cannot fit {reserved} bytes "
            f"(largest free span {self.largest_free()})")

    def free(self, addr: int) -> None:
        """
        Return an allocation to the free list, coalescing neighbours.

        Raises:
            InvalidFreeError: Unknown or already freed address
            SealedObjectError: The allocation is sealed
        """
        record = self.allocations.get(addr)
        if record is None:
            raise InvalidFreeError(f"No live allocation at {addr} in region of node {self.owner}")
        if record.sealed:
            raise SealedObjectError(f"Allocation at {addr} is sealed and cannot be freed")
        del self.allocations[addr]

        offset, length = addr - self.base, record.reserved
        index = bisect.bisect_left(self.free_list, (offset, 0))
        if index < len(self.free_list) and offset + length == self.free_list[index][0]:
            length += self.free_list[index][1]
            del self.free_list[index]
        if index > 0:
            prev_offset, prev_length = self.free_list[index - 1]
            if prev_offset + prev_length == offset:
                self.free_list[index - 1] = (prev_offset, prev_length + length)
                self._record(EventKind.FREE, addr, record.reserved)
                return
        self.free_list.insert(index, (offset, length))
        self._record(EventKind.FREE, addr, record.reserved)

    def seal(self, addr: int) -> None:
        """Mark the allocation starting at `addr` immutable."""
        record = self.allocations.get(addr)
        if record is None:
            raise InvalidFreeError(f"No live allocation at {addr} to seal")
        record.sealed = True

    def record_for(self, addr: int) -> Optional[AllocRecord]:
        return self.allocations.get(addr)

    def live_records(self) -> List[AllocRecord]:
        return [self.allocations[a] for a in sorted(self.allocations)]

    def free_bytes(self) -> int:
        return sum(length for _, length in self.free_list)

    def largest_free(self) -> int:
        return max((length for _, length in self.free_list), default=0)

    def stats(self) -> Dict[str, int]:
        """Region stats report."""
        return {
            'size': self.size,
            'live': len(self.allocations),
            'free_spans': len(self.free_list),
            'largest_free': self.largest_free(),
        }

    def stats_json(self) -> str:
        return json.dumps(self.stats())

    def _record(self, kind: EventKind, addr: int, length: int) -> None:
        if self.ledger is not None:
            self.ledger.record(kind, self.owner, addr, length)


def region_create(owner: int, base: int, size: int,
                  segment_map: Optional[SegmentMap] = None,
                  ledger: Optional['CostLedger'] = None) -> Region:
    """Create a Region (see Region.__init__)."""
    return Region(owner, base, size, segment_map, ledger)
