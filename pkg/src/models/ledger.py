"""Simulated-time ledger: per-node counters plus an ordered event trace."""
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Iterable, Iterator, List, Optional, Union

import pandas as pd

if TYPE_CHECKING:
    from ..config.cost_model import CostModel


logger = logging.getLogger(__name__)


class EventKind(Enum):
    """Trace event kinds (the `op` key of the JSON-lines export)."""
    READ = 'read'
    WRITE = 'write'
    FLUSH = 'flush'
    BARRIER = 'barrier'
    EVICT = 'evict'
    SNOOP = 'snoop'
    WRITEBACK = 'writeback'
    MSG = 'msg'
    ALLOC = 'alloc'
    FREE = 'free'
    CODEC = 'codec'


@dataclass(frozen=True)
class TraceEvent:
    """
    One ledger event.

    The line/byte counts are everything the cost model needs, so the
    charge can be re-derived from the event alone.
    """
    seq: int
    node: int
    op: EventKind
    addr: int
    length: int
    cost_ns: float = 0.0
    local_lines: int = 0
    remote_lines: int = 0
    snooped_lines: int = 0
    cached_lines: int = 0
    dirty_lines: int = 0
    round_trips: int = 0
    wire_bytes: int = 0
    peer: Optional[int] = None
    phase: Optional[str] = None
    detail: str = ''

    def to_record(self) -> Dict[str, object]:
        """Flatten to the JSON-lines record layout (seq, node, op, addr, len, cost_ns first)."""
        record = {
            'seq': self.seq,
            'node': self.node,
            'op': self.op.value,
            'addr': self.addr,
            'len': self.length,
            'cost_ns': self.cost_ns,
        }
        extra = asdict(self)
        for key in ('seq', 'node', 'op', 'addr', 'length', 'cost_ns'):
            extra.pop(key)
        record.update(extra)
        return record


@dataclass
class NodeCounters:
    """Monotonic per-node counters."""
    lines_fetched_local: int = 0
    lines_fetched_remote: int = 0
    lines_flushed: int = 0
    owner_snoops: int = 0
    bytes_over_ethernet: int = 0
    simulated_time_ns: float = 0.0


class CostLedger:
    """
    Accumulates trace events and charges them against a CostModel.

    simulated_time_ns always equals the in-order sum of event charges, so
    replay() over the trace reproduces it exactly.
    """

    def __init__(self, cost_model: 'CostModel', node_ids: Iterable[int]):
        self.cost_model = cost_model
        self.counters: Dict[int, NodeCounters] = {node: NodeCounters() for node in node_ids}
        self.trace: List[TraceEvent] = []
        self.simulated_time_ns = 0.0
        self._phases: List[str] = []

    @property
    def current_phase(self) -> Optional[str]:
        return self._phases[-1] if self._phases else None

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Tag every event recorded inside the block with `name` (innermost wins)."""
        self._phases.append(name)
        try:
            yield
        finally:
            self._phases.pop()

    def record(self, op: EventKind, node: int, addr: int = 0, length: int = 0, **counts) -> TraceEvent:
        """
        Append an event, charge it, and update the node's counters.

        Args:
            op: Event kind
            node: Node the event is attributed to
            addr: First address touched (0 for non-memory events)
            length: Bytes covered
            **counts: Line / byte counts, peer, detail

        Returns:
            The recorded TraceEvent
        """
        event = TraceEvent(seq=len(self.trace), node=node, op=op, addr=addr, length=length,
                           phase=self.current_phase, **counts)
        cost = self.cost_model.event_cost(event)
        event = replace(event, cost_ns=cost)
        self.trace.append(event)
        self.simulated_time_ns += cost

        counters = self.counters.setdefault(node, NodeCounters())
        counters.simulated_time_ns += cost
        if op in (EventKind.READ, EventKind.WRITE):
            counters.lines_fetched_local += event.local_lines
            counters.lines_fetched_remote += event.remote_lines
        elif op is EventKind.SNOOP:
            counters.owner_snoops += event.snooped_lines
        elif op is EventKind.FLUSH:
            counters.lines_flushed += event.cached_lines
        elif op is EventKind.MSG and event.peer != node:
            counters.bytes_over_ethernet += event.wire_bytes
        return event

    def mark(self) -> int:
        """Position in the trace, for measuring a window with time_since()."""
        return len(self.trace)

    def events_since(self, mark: int) -> List[TraceEvent]:
        return self.trace[mark:]

    def time_since(self, mark: int) -> float:
        """In-order sum of charges of events recorded after `mark`."""
        total = 0.0
        for event in self.trace[mark:]:
            total += event.cost_ns
        return total

    def replay(self, cost_model: Optional['CostModel'] = None) -> float:
        """
        Re-derive simulated time by charging every event again.

        Args:
            cost_model: Model to replay against (default: the ledger's own)

        Returns:
            Total simulated nanoseconds
        """
        model = cost_model or self.cost_model
        total = 0.0
        for event in self.trace:
            total += model.event_cost(event)
        return total

    def total_bytes_over_ethernet(self) -> int:
        return sum(c.bytes_over_ethernet for c in self.counters.values())

    def to_frame(self, since: int = 0) -> pd.DataFrame:
        """Trace as a DataFrame, one row per event."""
        records = [event.to_record() for event in self.trace[since:]]
        if not records:
            return pd.DataFrame(columns=['seq', 'node', 'op', 'addr', 'len', 'cost_ns', 'phase'])
        return pd.DataFrame.from_records(records)

    def phase_totals(self, since: int = 0) -> Dict[Optional[str], float]:
        """Simulated ns per phase tag, summed in trace order."""
        totals: Dict[Optional[str], float] = {}
        for event in self.trace[since:]:
            totals[event.phase] = totals.get(event.phase, 0.0) + event.cost_ns
        return totals

    def export_jsonl(self, path: Union[str, Path]) -> Path:
        """
        Write the trace as JSON lines.

        Args:
            path: Output file

        Returns:
            Resolved output path
        """
        output_path = Path(path)
        frame = self.to_frame()
        frame.to_json(output_path, orient='records', lines=True)
        logger.info(f"Trace exported to: {output_path.absolute()} ({len(frame)} events)")
        return output_path
