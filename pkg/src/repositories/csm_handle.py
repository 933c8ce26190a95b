"""Deterministic simulator of locally-coherent cluster shared memory."""
import hashlib
import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..config.cost_model import CostModel
from ..models.errors import AddressRangeError, AdversaryNotArmedError
from ..models.ledger import CostLedger, EventKind
from ..models.memory import CacheLine, CoherenceLevel, NodeCache, SegmentMap


logger = logging.getLogger(__name__)

BytesLike = Union[bytes, bytearray, memoryview, np.ndarray]

ABSENT, CLEAN, DIRTY = NodeCache.ABSENT, NodeCache.CLEAN, NodeCache.DIRTY


def _byte_length(data: BytesLike) -> int:
    if isinstance(data, np.ndarray):
        return int(data.nbytes)
    return memoryview(data).nbytes


def _as_byte_view(data: BytesLike) -> np.ndarray:
    """Flat uint8 view of a bytes-like payload (no copy when contiguous)."""
    if isinstance(data, np.ndarray):
        return np.ascontiguousarray(data).reshape(-1).view(np.uint8)
    return np.frombuffer(data, dtype=np.uint8)


class CsmHandle:
    """
    Cluster-global byte-addressable memory with one write-back cache per node.

    Caches are coherent within a node but never invalidated by other nodes.
    A remote read that misses its own cache snoops the owner's cache (LC_CSM)
    before falling back to backing memory. Every operation is charged on the
    handle's CostLedger.

    The handle is a single state machine; callers on several threads must
    serialize access themselves.
    """

    def __init__(self, segment_map: SegmentMap, cost_model: Optional[CostModel] = None,
                 level: CoherenceLevel = CoherenceLevel.LC_CSM,
                 eviction_seed: Optional[int] = None, cache_capacity: int = 0,
                 track_data: bool = True, auto_adversary_steps: int = 0):
        """
        Create a zero-initialized cluster memory.

        Args:
            segment_map: Address space layout (validated on construction)
            cost_model: Charges for the ledger (default: CostModel())
            level: Coherence level
            eviction_seed: Arms adversarial mode with this RNG seed
            cache_capacity: Lines per node cache, 0 for unbounded (LRU when bounded)
            track_data: False runs the state machine and ledger without storing bytes
            auto_adversary_steps: Adversary steps run after every public operation
        """
        self.segment_map = segment_map
        self.cost_model = cost_model or CostModel()
        self.level = level
        self.line_size = segment_map.line_size
        self.size = segment_map.address_space_size
        self.n_lines = self.size // self.line_size
        self.track_data = track_data
        self.auto_adversary_steps = auto_adversary_steps

        self._owners = segment_map.line_owners()
        self.backing: Optional[np.ndarray] = (
            np.zeros((self.n_lines, self.line_size), dtype=np.uint8) if track_data else None)
        self.caches: Dict[int, NodeCache] = {
            node: NodeCache(node, self.n_lines, self.line_size, cache_capacity, track_data)
            for node in segment_map.node_ids
        }
        self.ledger = CostLedger(self.cost_model, segment_map.node_ids)

        self.eviction_seed = eviction_seed
        self._rng = np.random.default_rng(eviction_seed) if eviction_seed is not None else None
        # node -> {line index: snapshot in flight}, insertion ordered
        self._pending: Dict[int, Dict[int, Optional[np.ndarray]]] = {
            node: {} for node in segment_map.node_ids}
        self._clock = 0
        self._in_adversary = False

        logger.info(f"Created CSM handle: {len(self.caches)} nodes, {self.size} bytes, "
                    f"level={level.name}, adversarial={self.armed}, track_data={track_data}")

    @property
    def armed(self) -> bool:
        return self._rng is not None

    @property
    def node_ids(self) -> List[int]:
        return list(self.caches)

    def owner_of(self, addr: int) -> int:
        self._line_range(addr, 1)
        return int(self._owners[addr // self.line_size])

    # ------------------------------------------------------------------
    # Public memory operations
    # ------------------------------------------------------------------

    def read(self, node: int, addr: int, length: int) -> bytes:
        """
        Load `length` bytes at `addr` as seen by `node`.

        Per line: own cache, else the owner's cache (LC_CSM, remote lines),
        else backing memory. Missed lines are installed clean.

        Raises:
            AddressRangeError: If the range leaves the address space
        """
        return self.read_array(node, addr, length).tobytes()

    def read_array(self, node: int, addr: int, length: int) -> np.ndarray:
        """Same as read() but returns a uint8 array."""
        self._check_node(node)
        lines = self._line_range(addr, length)
        if lines.size == 0:
            return np.zeros(0, dtype=np.uint8)
        local, remote, snooped = self._fill(node, lines)
        result = self._cached_bytes(node, lines, addr, length)
        self._touch(node, lines)
        self._record_access(EventKind.READ, node, addr, length, local, remote, snooped)
        self._enforce_capacity(node)
        self._after_op()
        return result

    def gather(self, node: int, addrs: np.ndarray, width: int) -> np.ndarray:
        """
        Batched fixed-width reads, charged as one read call.

        Args:
            node: Reading node
            addrs: Start address of every element
            width: Element width in bytes; elements may not straddle lines

        Returns:
            (len(addrs), width) uint8 array
        """
        self._check_node(node)
        addrs = np.asarray(addrs, dtype=np.int64).reshape(-1)
        if addrs.size == 0:
            return np.zeros((0, width), dtype=np.uint8)
        if addrs.min() < 0 or addrs.max() + width > self.size:
            raise AddressRangeError(f"Gather outside address space [0, {self.size})")
        offsets = addrs % self.line_size
        if (offsets + width > self.line_size).any():
            raise ValueError("Gathered elements must not straddle cache lines")
        line_of = addrs // self.line_size
        lines = np.unique(line_of)
        if (self._owners[lines] < 0).any():
            raise AddressRangeError("Gather touches unowned memory")

        local, remote, snooped = self._fill(node, lines)
        if self.track_data:
            cache = self.caches[node]
            result = cache.data[line_of[:, None], offsets[:, None] + np.arange(width)]
        else:
            result = np.zeros((addrs.size, width), dtype=np.uint8)
        self._touch(node, lines)
        self._record_access(EventKind.READ, node, int(addrs.min()), int(addrs.size * width),
                            local, remote, snooped, detail='gather')
        self._enforce_capacity(node)
        self._after_op()
        return result

    def write(self, node: int, addr: int, data: BytesLike) -> None:
        """
        Store `data` at `addr` through `node`'s cache.

        Write-allocate, write-back: missing lines are filled via the read
        path, modified in the cache and marked dirty. Backing memory is only
        updated under GC_CSM.

        Raises:
            AddressRangeError: If the range leaves the address space
        """
        self._check_node(node)
        length = _byte_length(data)
        lines = self._line_range(addr, length)
        if lines.size == 0:
            return
        local, remote, snooped = self._fill(node, lines)
        cache = self.caches[node]
        first, last = int(lines[0]), int(lines[-1])
        if self.track_data:
            window = cache.data[first:last + 1].reshape(-1)
            offset = addr - first * self.line_size
            window[offset:offset + length] = _as_byte_view(data)

        if self.level is CoherenceLevel.GC_CSM:
            if self.track_data:
                self.backing[first:last + 1] = cache.data[first:last + 1]
            cache.state[lines] = CLEAN
            for other, other_cache in self.caches.items():
                if other != node:
                    other_cache.drop(lines)
        else:
            cache.state[lines] = DIRTY

        self._touch(node, lines)
        self._record_access(EventKind.WRITE, node, addr, length, local, remote, snooped)
        self._enforce_capacity(node)
        self._after_op()

    def flush_range(self, node: int, addr: int, length: int) -> int:
        """
        Write back dirty lines of the range and evict every cached line of it.

        Every line of the range owned by another node is charged
        flush_remote_line whether `node` caches it or not; only cached
        lines are charged flush_local_line. Owned lines that are not
        cached cost nothing.

        Returns:
            Number of lines removed from `node`'s cache
        """
        self._check_node(node)
        lines = self._line_range(addr, length)
        if lines.size == 0:
            return 0
        cache = self.caches[node]
        self._complete_pending(node, lines)
        states = cache.state[lines]
        cached = lines[states != ABSENT]
        dirty = lines[states == DIRTY]
        if dirty.size:
            self._write_back(node, dirty)
        removed = cache.drop(cached)
        remote_in_range = int(np.count_nonzero(self._owners[lines] != node))
        self.ledger.record(EventKind.FLUSH, node, addr, length, cached_lines=removed,
                           dirty_lines=int(dirty.size), remote_lines=remote_in_range)
        logger.debug(f"Node {node} flushed [{addr}, {addr + length}): "
                     f"{removed} lines removed, {dirty.size} written back")
        self._after_op()
        return removed

    def barrier(self, node: int) -> None:
        """Memory barrier: in-flight write-backs of `node` complete before it returns."""
        self._check_node(node)
        self._complete_pending(node)
        self.ledger.record(EventKind.BARRIER, node)
        self._after_op()

    def step_adversary(self) -> None:
        """
        One seeded adversary move on a random node.

        Moves: drop a clean line, write back and drop a dirty line, start a
        spontaneous write-back of a dirty line, or complete one in flight.

        Raises:
            AdversaryNotArmedError: If the handle was created without eviction_seed
        """
        if self._rng is None:
            raise AdversaryNotArmedError("Adversarial mode is not armed (no eviction_seed)")
        rng = self._rng
        nodes = self.node_ids
        node = nodes[int(rng.integers(len(nodes)))]
        action = int(rng.integers(4))
        cache = self.caches[node]
        pending = self._pending[node]

        if action == 0:
            clean = cache.present_lines(CLEAN)
            if pending:
                clean = clean[~np.isin(clean, np.fromiter(pending, dtype=np.int64))]
            if clean.size:
                victim = clean[int(rng.integers(clean.size))]
                self._evict(node, np.array([victim]), detail='adversary-drop')
        elif action == 1:
            dirty = cache.present_lines(DIRTY)
            if dirty.size:
                victim = dirty[int(rng.integers(dirty.size))]
                self._evict(node, np.array([victim]), detail='adversary-writeback')
        elif action == 2:
            dirty = cache.present_lines(DIRTY)
            if dirty.size:
                line = int(dirty[int(rng.integers(dirty.size))])
                snapshot = cache.data[line].copy() if self.track_data else None
                pending.pop(line, None)
                pending[line] = snapshot
                cache.state[line] = CLEAN
        elif pending:
            keys = list(pending)
            line = keys[int(rng.integers(len(keys)))]
            self._land_pending(node, line)

    def run_adversary(self, steps: int) -> None:
        for _ in range(steps):
            self.step_adversary()

    # ------------------------------------------------------------------
    # Introspection (no charges, no fills)
    # ------------------------------------------------------------------

    def backing_peek(self, addr: int, length: int) -> bytes:
        """Raw backing memory bytes."""
        lines = self._line_range(addr, length)
        if lines.size == 0:
            return b''
        if not self.track_data:
            return bytes(length)
        first, last = int(lines[0]), int(lines[-1])
        window = self.backing[first:last + 1].reshape(-1)
        offset = addr - first * self.line_size
        return window[offset:offset + length].tobytes()

    def cache_peek(self, node: int, line_addr: int) -> Optional[CacheLine]:
        """Cached copy of the line containing `line_addr` at `node`, or None."""
        self._check_node(node)
        self._line_range(line_addr, 1)
        return self.caches[node].get(line_addr)

    def pending_writebacks(self, node: int) -> List[int]:
        """Line addresses with a spontaneous write-back in flight."""
        return [line * self.line_size for line in self._pending[node]]

    def state_digest(self) -> str:
        """Hash over backing memory and every cache, for determinism checks."""
        digest = hashlib.sha256()
        if self.backing is not None:
            digest.update(self.backing.tobytes())
        for node, cache in self.caches.items():
            digest.update(node.to_bytes(4, 'little'))
            digest.update(cache.state.tobytes())
            if cache.data is not None:
                present = cache.present_lines()
                digest.update(present.tobytes())
                digest.update(cache.data[present].tobytes())
        return digest.hexdigest()

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------

    def _check_node(self, node: int) -> None:
        if node not in self.caches:
            raise KeyError(f"Unknown node {node}")

    def _line_range(self, addr: int, length: int) -> np.ndarray:
        if length < 0 or addr < 0 or addr + length > self.size or (length == 0 and addr > self.size):
            raise AddressRangeError(
                f"Range [{addr}, {addr + length}) outside address space [0, {self.size})")
        if length == 0:
            return np.zeros(0, dtype=np.int64)
        first = addr // self.line_size
        last = (addr + length - 1) // self.line_size
        if (self._owners[first:last + 1] < 0).any():
            raise AddressRangeError(f"Range [{addr}, {addr + length}) touches unowned memory")
        return np.arange(first, last + 1, dtype=np.int64)

    def _fill(self, node: int, lines: np.ndarray) -> Tuple[int, int, int]:
        """Install missing lines; returns (local backing, remote backing, snooped) counts."""
        cache = self.caches[node]
        missing = lines[cache.state[lines] == ABSENT]
        if missing.size == 0:
            return 0, 0, 0
        owners = self._owners[missing]
        remote = owners != node
        snooped = np.zeros(missing.size, dtype=bool)

        if self.level is CoherenceLevel.LC_CSM and remote.any():
            for other, other_cache in self.caches.items():
                if other == node:
                    continue
                mask = remote & (owners == other)
                if not mask.any():
                    continue
                mask &= other_cache.state[missing] != ABSENT
                if mask.any():
                    if self.track_data:
                        rows = missing[mask]
                        cache.data[rows] = other_cache.data[rows]
                    snooped |= mask

        from_backing = ~snooped
        if self.track_data and from_backing.any():
            rows = missing[from_backing]
            cache.data[rows] = self.backing[rows]
        cache.install(missing, dirty=False)

        local = int(np.count_nonzero(from_backing & ~remote))
        remote_fills = int(np.count_nonzero(from_backing & remote))
        return local, remote_fills, int(np.count_nonzero(snooped))

    def _cached_bytes(self, node: int, lines: np.ndarray, addr: int, length: int) -> np.ndarray:
        if not self.track_data:
            return np.zeros(length, dtype=np.uint8)
        first, last = int(lines[0]), int(lines[-1])
        window = self.caches[node].data[first:last + 1].reshape(-1)
        offset = addr - first * self.line_size
        return window[offset:offset + length].copy()

    def _record_access(self, kind: EventKind, node: int, addr: int, length: int,
                       local: int, remote: int, snooped: int, detail: str = '') -> None:
        round_trips = 1 if (remote or snooped) else 0
        self.ledger.record(kind, node, addr, length, local_lines=local, remote_lines=remote,
                           round_trips=round_trips, detail=detail)
        if snooped:
            self.ledger.record(EventKind.SNOOP, node, addr, length, snooped_lines=snooped)

    def _touch(self, node: int, lines: np.ndarray) -> None:
        self._clock += 1
        self.caches[node].touch(lines, self._clock)

    def _enter_owner_domain(self, writer: int, lines: np.ndarray) -> None:
        """
        A write-back from a non-owner lands through the owner's coherent bus:
        the owner's own cached copy of those lines is dropped.
        """
        if self.level is CoherenceLevel.NC_CSM:
            return
        owners = self._owners[lines]
        for other, other_cache in self.caches.items():
            if other == writer:
                continue
            owned = lines[owners == other]
            if owned.size:
                self._complete_pending(other, owned)
                other_cache.drop(owned)

    def _write_back(self, node: int, lines: np.ndarray) -> None:
        """Copy dirty lines of `node` to backing memory; they become clean."""
        self._enter_owner_domain(node, lines)
        cache = self.caches[node]
        if self.track_data:
            self.backing[lines] = cache.data[lines]
        cache.state[lines] = CLEAN

    def _land_pending(self, node: int, line: int) -> None:
        snapshot = self._pending[node].pop(line)
        single = np.array([line], dtype=np.int64)
        self._enter_owner_domain(node, single)
        if self.track_data and snapshot is not None:
            self.backing[line] = snapshot
        self.ledger.record(EventKind.WRITEBACK, node, line * self.line_size, self.line_size,
                           dirty_lines=1)

    def _complete_pending(self, node: int, lines: Optional[np.ndarray] = None) -> None:
        pending = self._pending[node]
        if not pending:
            return
        keys = np.fromiter(pending, dtype=np.int64)
        if lines is not None:
            keys = keys[np.isin(keys, lines)]
        for line in keys.tolist():
            self._land_pending(node, line)

    def _evict(self, node: int, victims: np.ndarray, detail: str = '') -> None:
        cache = self.caches[node]
        self._complete_pending(node, victims)
        dirty = victims[cache.state[victims] == DIRTY]
        if dirty.size:
            self._write_back(node, dirty)
        removed = cache.drop(victims)
        self.ledger.record(EventKind.EVICT, node, int(victims.min()) * self.line_size,
                           removed * self.line_size, cached_lines=removed,
                           dirty_lines=int(dirty.size), detail=detail)

    def _enforce_capacity(self, node: int) -> None:
        cache = self.caches[node]
        if not cache.capacity or len(cache) <= cache.capacity:
            return
        present = cache.present_lines()
        excess = len(cache) - cache.capacity
        order = np.lexsort((present, cache.last_use[present]))
        self._evict(node, present[order[:excess]], detail='capacity')

    def _after_op(self) -> None:
        if self._rng is None or not self.auto_adversary_steps or self._in_adversary:
            return
        self._in_adversary = True
        try:
            self.run_adversary(self.auto_adversary_steps)
        finally:
            self._in_adversary = False


def csm_create(segment_map: SegmentMap, cost_model: Optional[CostModel] = None,
               level: CoherenceLevel = CoherenceLevel.LC_CSM,
               eviction_seed: Optional[int] = None, **options) -> CsmHandle:
    """Create a zero-initialized CSM handle (see CsmHandle for options)."""
    return CsmHandle(segment_map, cost_model, level, eviction_seed, **options)
