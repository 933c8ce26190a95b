"""
Cluster runtime: per-node message handlers over an in-process fabric.

Delivery is deterministic. Each directed channel is FIFO; the next channel
to deliver from is the lowest non-empty one, or a seeded random pick when
the cluster has a schedule seed. Blocking calls keep pumping the fabric, so
a node waiting for acks still serves incoming requests.
"""
import logging
from collections import deque
from itertools import count
from typing import Callable, Deque, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..config.cluster import ClusterConfig
from ..config.cost_model import CostModel
from ..models.columnar import RecordBatchDescriptor
from ..models.errors import (
    ClusterShutdownError, CsmError, InvalidFreeError, OutOfMemoryError, RpcTimeoutError,
)
from ..models.ledger import EventKind
from ..models.memory import SegmentMap
from ..models.messages import (
    AllocRequest, AllocResponse, DescriptorBroadcast, FlushAck, FlushRequest, FreeRequest,
    FreeResponse, FullCopy, Message, SealNotice, Shutdown,
)
from ..models.sealed_registry import SealedRegistry
from ..repositories.csm_handle import CsmHandle
from ..repositories.shared_region import Region
from .descriptor_ipc import deserialize_descriptor, serialize_descriptor


logger = logging.getLogger(__name__)

Channel = Tuple[int, int]


class NodeRuntime:
    """
    Event handler of one node.

    Only this node mutates the regions it owns; every request for them
    arrives as a message.
    """

    def __init__(self, node_id: int, cluster: 'ClusterHandle', regions: Sequence[Region] = ()):
        self.node_id = node_id
        self.cluster = cluster
        self.regions: List[Region] = list(regions)
        self.registry = SealedRegistry()
        self.received_descriptors: List[bytes] = []
        self.received_copies: List[RecordBatchDescriptor] = []
        self.running = True
        self.handled = 0

    @property
    def csm(self) -> CsmHandle:
        return self.cluster.csm

    def add_region(self, region: Region) -> None:
        if region.owner != self.node_id:
            raise ValueError(f"Node {self.node_id} cannot host a region owned by node {region.owner}")
        self.regions.append(region)

    def region_for(self, addr: int) -> Optional[Region]:
        for region in self.regions:
            if region.contains(addr):
                return region
        return None

    def flush_local(self, addr: int, length: int) -> int:
        """Barrier, flush of the range from this node's cache, barrier."""
        self.csm.barrier(self.node_id)
        removed = self.csm.flush_range(self.node_id, addr, length)
        self.csm.barrier(self.node_id)
        return removed

    def handle(self, message: Message, sender: int) -> None:
        """Dispatch one delivered message."""
        self.handled += 1
        handler = getattr(self, f"_on_{type(message).__name__}", None)
        if handler is None:
            raise TypeError(f"Node {self.node_id} has no handler for {type(message).__name__}")
        handler(message, sender)

    def _on_AllocRequest(self, message: AllocRequest, sender: int) -> None:
        for region in self.regions:
            try:
                addr = region.alloc(message.size)
            except OutOfMemoryError:
                continue
            self.cluster.send(self.node_id, sender, AllocResponse(message.req_id, addr))
            return
        logger.warning(f"Node {self.node_id} cannot satisfy allocation of {message.size} bytes")
        self.cluster.send(self.node_id, sender, AllocResponse(message.req_id, 0, oom=True))

    def _on_FreeRequest(self, message: FreeRequest, sender: int) -> None:
        region = self.region_for(message.addr)
        try:
            if region is None:
                raise InvalidFreeError(f"Address {message.addr} is not in any region of node {self.node_id}")
            region.free(message.addr)
        except CsmError as e:
            self.cluster.send(self.node_id, sender, FreeResponse(message.req_id, False, str(e)))
            return
        self.cluster.send(self.node_id, sender, FreeResponse(message.req_id, True))

    def _on_FlushRequest(self, message: FlushRequest, sender: int) -> None:
        self.flush_local(message.addr, message.length)
        self.cluster.send(self.node_id, sender, FlushAck(message.req_id))

    def _on_SealNotice(self, message: SealNotice, sender: int) -> None:
        self.registry.add(message.addr, message.length)
        region = self.region_for(message.addr)
        if region is not None and region.record_for(message.addr) is not None:
            region.seal(message.addr)

    def _on_DescriptorBroadcast(self, message: DescriptorBroadcast, sender: int) -> None:
        self.received_descriptors.append(message.payload)

    def _on_FullCopy(self, message: FullCopy, sender: int) -> None:
        from .protocol import CoherenceProtocol

        source = deserialize_descriptor(message.descriptor)
        copy = CoherenceProtocol(self.cluster).rebuild_batch(self.node_id, source, message.buffers)
        self.received_copies.append(copy)

    def _on_Shutdown(self, message: Shutdown, sender: int) -> None:
        self.running = False

    def _on_AllocResponse(self, message: AllocResponse, sender: int) -> None:
        self.cluster.deliver_reply(message.req_id, message)

    def _on_FreeResponse(self, message: FreeResponse, sender: int) -> None:
        self.cluster.deliver_reply(message.req_id, message)

    def _on_FlushAck(self, message: FlushAck, sender: int) -> None:
        self.cluster.deliver_reply(message.req_id, message)


class ClusterHandle:
    """
    All node runtimes plus the message fabric connecting them.

    Every message is charged on the CSM ledger when sent; self-sends use a
    loopback queue and cost nothing.
    """

    def __init__(self, csm: CsmHandle, schedule_seed: Optional[int] = None):
        self.csm = csm
        self.segment_map: SegmentMap = csm.segment_map
        self.ledger = csm.ledger
        self.nodes: Dict[int, NodeRuntime] = {
            node: NodeRuntime(node, self) for node in self.segment_map.node_ids}
        self.channels: Dict[Channel, Deque[Message]] = {
            (src, dst): deque() for src in self.nodes for dst in self.nodes if src != dst}
        self.loopback: Dict[int, Deque[Message]] = {node: deque() for node in self.nodes}
        self._rng = np.random.default_rng(schedule_seed) if schedule_seed is not None else None
        self._req_ids = count(1)
        self._replies: Dict[int, Message] = {}
        self._isolated: Set[int] = set()
        self._closed = False
        self.delivered = 0
        self.dropped = 0

    @property
    def node_ids(self) -> List[int]:
        return list(self.nodes)

    def next_req_id(self) -> int:
        return next(self._req_ids)

    # ------------------------------------------------------------------
    # Fabric
    # ------------------------------------------------------------------

    def send(self, src: int, dst: int, message: Message) -> None:
        """
        Queue a message and charge it.

        Raises:
            ClusterShutdownError: If the cluster has been shut down
        """
        if self._closed:
            raise ClusterShutdownError(f"Cannot send {type(message).__name__}: cluster is shut down")
        if dst not in self.nodes:
            raise KeyError(f"Unknown node {dst}")
        self.ledger.record(EventKind.MSG, src, 0, 0, wire_bytes=message.wire_size(), peer=dst,
                           detail=type(message).__name__)
        if src in self._isolated or dst in self._isolated:
            self.dropped += 1
            logger.warning(f"Dropped {type(message).__name__} {src}->{dst}: node isolated")
            return
        queue = self.loopback[src] if src == dst else self.channels[(src, dst)]
        queue.append(message)

    def pending(self) -> int:
        return sum(len(q) for q in self.channels.values()) + sum(len(q) for q in self.loopback.values())

    def pump_one(self) -> bool:
        """Deliver one message; False when every queue is empty."""
        ready: List[Tuple[Channel, Deque[Message]]] = [
            ((node, node), q) for node, q in self.loopback.items() if q]
        ready += [(key, q) for key, q in self.channels.items() if q]
        if not ready:
            return False
        ready.sort(key=lambda item: item[0])
        index = int(self._rng.integers(len(ready))) if self._rng is not None else 0
        (src, dst), queue = ready[index]
        message = queue.popleft()
        self.delivered += 1
        logger.debug(f"Deliver {type(message).__name__} {src}->{dst}")
        self.nodes[dst].handle(message, src)
        return True

    def drain(self) -> int:
        """Deliver until every queue is empty; returns the number delivered."""
        delivered = 0
        while self.pump_one():
            delivered += 1
        return delivered

    def run_until(self, done: Callable[[], bool], what: str) -> None:
        """
        Pump until `done()` holds.

        Raises:
            RpcTimeoutError: If the fabric runs dry first
        """
        while not done():
            if not self.pump_one():
                raise RpcTimeoutError(f"Timed out waiting for {what}")

    def deliver_reply(self, req_id: int, message: Message) -> None:
        self._replies[req_id] = message

    def call(self, src: int, dst: int, message: Message) -> Message:
        """Send a request carrying req_id and wait for its reply."""
        req_id = message.req_id
        self.send(src, dst, message)
        self.run_until(lambda: req_id in self._replies,
                       f"reply to {type(message).__name__} from node {dst}")
        return self._replies.pop(req_id)

    def isolate(self, node: int) -> None:
        """Drop all traffic to and from `node` (fault injection)."""
        self._isolated.add(node)
        logger.warning(f"Node {node} isolated")

    def heal(self, node: int) -> None:
        self._isolated.discard(node)

    # ------------------------------------------------------------------
    # Operations
    # ------------------------------------------------------------------

    def rpc_alloc(self, src: int, owner: int, size: int) -> int:
        """
        Ask `owner` to allocate `size` bytes in one of its regions.

        Returns:
            Allocated global address

        Raises:
            OutOfMemoryError: Owner has no free span large enough
            RpcTimeoutError: Owner unreachable
        """
        reply = self.call(src, owner, AllocRequest(self.next_req_id(), size))
        if reply.oom:
            raise OutOfMemoryError(f"Node {owner} could not allocate {size} bytes")
        logger.debug(f"Node {src} got {size} bytes at {reply.addr} from node {owner}")
        return reply.addr

    def rpc_free(self, src: int, owner: int, addr: int) -> None:
        """
        Ask `owner` to free an allocation.

        Raises:
            InvalidFreeError: The owner rejected the free
        """
        reply = self.call(src, owner, FreeRequest(self.next_req_id(), addr))
        if not reply.ok:
            raise InvalidFreeError(reply.error)

    def broadcast_flush(self, initiator: int, addr: int, length: int) -> None:
        """
        Every node flushes the range; returns once all acks arrived.

        Raises:
            RpcTimeoutError: If some node never acknowledges
        """
        req_ids = set()
        try:
            for node in self.nodes:
                req_id = self.next_req_id()
                req_ids.add(req_id)
                self.send(initiator, node, FlushRequest(req_id, addr, length))
            self.run_until(lambda: req_ids.issubset(self._replies),
                           f"flush acks for [{addr}, {addr + length})")
        finally:
            for req_id in req_ids:
                self._replies.pop(req_id, None)

    def broadcast_seal(self, initiator: int, addr: int, length: int) -> None:
        """Seal a range on every node's registry replica."""
        for node in self.nodes:
            self.send(initiator, node, SealNotice(addr, length))
        self.drain()

    def broadcast_descriptor(self, initiator: int, payload: bytes) -> None:
        """Send serialized descriptor bytes to every other node."""
        for node in self.nodes:
            if node != initiator:
                self.send(initiator, node, DescriptorBroadcast(payload))
        self.drain()

    def ethernet_full_copy(self, src: int, dst: int,
                           batch: RecordBatchDescriptor) -> RecordBatchDescriptor:
        """
        Baseline transfer: ship descriptor and data, rebuild at `dst`.

        The source reads every buffer through its cache; the receiver
        allocates local buffers with the full creation protocol.

        Returns:
            New descriptor referencing memory owned by `dst`
        """
        buffers = []
        for array in batch.columns:
            for buf in array.buffers():
                buffers.append(self.csm.read_array(src, buf.addr, buf.length))
        descriptor = serialize_descriptor(batch, self.ledger, src)
        receiver = self.nodes[dst]
        before = len(receiver.received_copies)
        self.send(src, dst, FullCopy(descriptor, tuple(buffers)))
        self.run_until(lambda: len(receiver.received_copies) > before, f"full copy at node {dst}")
        self.drain()
        return receiver.received_copies[-1]

    def shutdown(self) -> None:
        """Deliver everything still queued, stop every node, refuse further sends."""
        if self._closed:
            return
        self.drain()
        for node in self.nodes:
            self.send(node, node, Shutdown())
        self.drain()
        self._closed = True
        logger.info(f"Cluster shut down after {self.delivered} deliveries ({self.dropped} dropped)")

    @property
    def is_shut_down(self) -> bool:
        return self._closed


def rt_spawn(csm: CsmHandle, segment_map: Optional[SegmentMap] = None,
             cost_model: Optional[CostModel] = None, schedule_seed: Optional[int] = None,
             with_regions: bool = True) -> ClusterHandle:
    """
    Start one runtime per segment, connected all-to-all.

    Args:
        csm: Shared memory handle
        segment_map: Must be the handle's map when given
        cost_model: Must be the handle's model when given
        schedule_seed: Seeds delivery order
        with_regions: Give every node one region covering its whole segment

    Returns:
        ClusterHandle
    """
    if segment_map is not None and segment_map != csm.segment_map:
        raise ValueError("Segment map differs from the CSM handle's map")
    if cost_model is not None and cost_model != csm.cost_model:
        raise ValueError("Cost model differs from the CSM handle's model")
    cluster = ClusterHandle(csm, schedule_seed)
    if with_regions:
        for segment in csm.segment_map.entries:
            cluster.nodes[segment.node_id].add_region(
                Region(segment.node_id, segment.base, segment.size, csm.segment_map, csm.ledger))
    logger.info(f"Spawned cluster: {len(cluster.nodes)} nodes, {len(cluster.channels)} channels")
    return cluster


def spawn_cluster(config: ClusterConfig, cost_model: Optional[CostModel] = None) -> ClusterHandle:
    """Build segment map, CSM handle and runtimes from a ClusterConfig."""
    config.validate()
    csm = CsmHandle(config.segment_map(), cost_model, config.coherence, config.eviction_seed,
                    cache_capacity=config.cache_capacity, track_data=config.track_data)
    return rt_spawn(csm, schedule_seed=config.schedule_seed)
