"""Memory model types: coherence levels, segment map and per-node caches."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, NewType, Optional, Tuple

import numpy as np

from ..config.settings import Settings
from .errors import SegmentMapError


GlobalAddress = NewType('GlobalAddress', int)


class CoherenceLevel(Enum):
    """Cluster shared memory coherence levels."""
    NC_CSM = 'nc'  # no cross-node coherence, no owner snoop
    LC_CSM = 'lc'  # coherent within a node, owner cache snooped on remote reads
    GC_CSM = 'gc'  # writes visible cluster-wide at once (test oracle)

    @classmethod
    def parse(cls, value: str) -> 'CoherenceLevel':
        normalized = value.strip().lower().replace('-', '_')
        for level in cls:
            if normalized in (level.value, level.name.lower()):
                return level
        raise ValueError(f"Unknown coherence level: {value}")


@dataclass(frozen=True)
class Segment:
    """Contiguous address range owned by one node."""
    node_id: int
    base: int
    size: int

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int, length: int = 1) -> bool:
        return self.base <= addr and addr + max(length, 1) <= self.end


@dataclass(frozen=True)
class SegmentMap:
    """
    Cluster-wide address space and per-node ownership ranges.

    Every address is the same on every node by construction, which is what
    mapping each region at a fixed location on all nodes achieves on real
    machines.
    """
    entries: Tuple[Segment, ...]
    line_size: int = Settings.CACHE_LINE_SIZE

    def __post_init__(self):
        """Validate disjointness and alignment."""
        if not self.entries:
            raise SegmentMapError("Segment map needs at least one segment")
        seen_nodes = set()
        for seg in self.entries:
            if seg.size <= 0:
                raise SegmentMapError(f"Segment of node {seg.node_id} is empty")
            if seg.base % self.line_size or seg.size % self.line_size:
                raise SegmentMapError(
                    f"Segment of node {seg.node_id} is misaligned: base={seg.base}, size={seg.size}")
            if seg.node_id in seen_nodes:
                raise SegmentMapError(f"Node {seg.node_id} owns more than one segment")
            seen_nodes.add(seg.node_id)
        ordered = sorted(self.entries, key=lambda s: s.base)
        for left, right in zip(ordered, ordered[1:]):
            if right.base < left.end:
                raise SegmentMapError(
                    f"Segments of nodes {left.node_id} and {right.node_id} overlap")

    @classmethod
    def uniform(cls, nodes: int, segment_bytes: int, gap_bytes: int = 0) -> 'SegmentMap':
        """
        Equal-sized segments laid out back to back.

        Args:
            nodes: Number of nodes (node ids 0..nodes-1)
            segment_bytes: Size of every segment
            gap_bytes: Unowned bytes between consecutive segments

        Returns:
            SegmentMap instance
        """
        stride = segment_bytes + gap_bytes
        return cls(tuple(Segment(node, node * stride, segment_bytes) for node in range(nodes)))

    @classmethod
    def from_sizes(cls, sizes: List[int]) -> 'SegmentMap':
        """Back-to-back segments with per-node sizes."""
        entries, base = [], 0
        for node, size in enumerate(sizes):
            entries.append(Segment(node, base, size))
            base += size
        return cls(tuple(entries))

    @property
    def node_ids(self) -> List[int]:
        return [seg.node_id for seg in self.entries]

    @property
    def address_space_size(self) -> int:
        """Backing store length: up to the end of the highest segment, gaps included."""
        return max(seg.end for seg in self.entries)

    def segment_of(self, node_id: int) -> Segment:
        for seg in self.entries:
            if seg.node_id == node_id:
                return seg
        raise KeyError(f"No segment for node {node_id}")

    def owner_of(self, addr: int) -> Optional[int]:
        for seg in self.entries:
            if seg.base <= addr < seg.end:
                return seg.node_id
        return None

    def line_owners(self) -> np.ndarray:
        """Owner node id per cache line, -1 for lines in gaps."""
        owners = np.full(self.address_space_size // self.line_size, -1, dtype=np.int32)
        for seg in self.entries:
            owners[seg.base // self.line_size: seg.end // self.line_size] = seg.node_id
        return owners


@dataclass(frozen=True)
class CacheLine:
    """Snapshot of one cached line."""
    line_addr: int
    data: bytes
    dirty: bool


class NodeCache:
    """
    Write-back cache of one node, stored as flat per-line state arrays.

    state[line] is ABSENT, CLEAN or DIRTY; data holds the cached bytes as an
    (n_lines, line_size) array, or is None in cost-only mode.
    """

    ABSENT = 0
    CLEAN = 1
    DIRTY = 2

    def __init__(self, node_id: int, n_lines: int, line_size: int = Settings.CACHE_LINE_SIZE,
                 capacity: int = 0, track_data: bool = True):
        self.node_id = node_id
        self.line_size = line_size
        self.capacity = capacity
        self.state = np.zeros(n_lines, dtype=np.uint8)
        self.data: Optional[np.ndarray] = (
            np.zeros((n_lines, line_size), dtype=np.uint8) if track_data else None)
        self.last_use: Optional[np.ndarray] = np.zeros(n_lines, dtype=np.int64) if capacity else None
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def __contains__(self, line_addr: int) -> bool:
        index = line_addr // self.line_size
        return 0 <= index < self.state.size and self.state[index] != self.ABSENT

    def install(self, lines: np.ndarray, dirty: bool = False) -> None:
        """Mark absent lines present (caller copies the data)."""
        self.state[lines] = self.DIRTY if dirty else self.CLEAN
        self._count += int(lines.size)

    def drop(self, lines: np.ndarray) -> int:
        """Remove lines; returns how many were present."""
        present = lines[self.state[lines] != self.ABSENT]
        self.state[present] = self.ABSENT
        self._count -= int(present.size)
        return int(present.size)

    def touch(self, lines: np.ndarray, tick: int) -> None:
        if self.last_use is not None:
            self.last_use[lines] = tick

    def present_lines(self, state: Optional[int] = None) -> np.ndarray:
        if state is None:
            return np.flatnonzero(self.state != self.ABSENT)
        return np.flatnonzero(self.state == state)

    def get(self, line_addr: int) -> Optional[CacheLine]:
        """Snapshot of the line at `line_addr`, or None when not cached."""
        if line_addr not in self:
            return None
        index = line_addr // self.line_size
        data = bytes(self.data[index]) if self.data is not None else bytes(self.line_size)
        return CacheLine(line_addr=index * self.line_size, data=data,
                         dirty=bool(self.state[index] == self.DIRTY))

    def __iter__(self) -> Iterator[int]:
        for index in self.present_lines():
            yield int(index) * self.line_size
