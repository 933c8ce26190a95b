"""Simulated-time cost model."""
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Union

from dotenv import load_dotenv

from .settings import GIB

if TYPE_CHECKING:
    from ..models.ledger import TraceEvent


# Reference breakdown: 1 GiB of uint64 elements is 8,388,608 cache lines.
REFERENCE_LINES = 8_388_608
REFERENCE_GRPC_NS = 3.3e6
REFERENCE_PRE_WRITE_FLUSH_NS = 51.84e6
REFERENCE_MALLOC_NS = 4.99e6

# The two calibration constants fitted from the reference breakdown.
CALIBRATED_FLUSH_REMOTE_LINE = (REFERENCE_PRE_WRITE_FLUSH_NS - REFERENCE_GRPC_NS) / REFERENCE_LINES
CALIBRATED_ALLOC_OVERHEAD = REFERENCE_MALLOC_NS - REFERENCE_GRPC_NS


@dataclass(frozen=True)
class CostModel:
    """
    Per-event charges in simulated nanoseconds.

    Attributes:
        local_line_fetch: Fill of one line from memory the node owns
        remote_rtt: Link round trip, paid once per call that touches remote memory
        remote_line_transfer: Fill of one line over the link (backing or owner snoop)
        flush_local_line: Flush of one line present in the flushing node's cache
        flush_remote_line: Flush issued for one line owned by another node
        ethernet_msg_latency: Round trip of a small message; one-way costs half
        ethernet_bandwidth: Bytes per simulated second on the ethernet fabric
        csm_link_bandwidth: Peak bytes per simulated second of the memory link
        alloc_overhead: Owner-side handling of one allocation request
        serialize_descriptor: One descriptor serialization
    """
    local_line_fetch: float = 2.5
    remote_rtt: float = 650.0
    remote_line_transfer: float = 21.4577
    flush_local_line: float = 1.4
    flush_remote_line: float = 4.0
    ethernet_msg_latency: float = REFERENCE_GRPC_NS
    ethernet_bandwidth: float = 125_000_000.0
    csm_link_bandwidth: float = float(10 * GIB)
    alloc_overhead: float = 1.0e5
    serialize_descriptor: float = 5.8e4

    def __post_init__(self):
        """Reject negative charges."""
        for f in fields(self):
            value = getattr(self, f.name)
            if value < 0:
                raise ValueError(f"Cost model field '{f.name}' must be non-negative, got {value}")
        if self.ethernet_bandwidth == 0 or self.csm_link_bandwidth == 0:
            raise ValueError("Bandwidths must be positive")

    @classmethod
    def calibrated(cls, **overrides: float) -> 'CostModel':
        """
        Cost model with the two reference calibration constants fitted.

        Args:
            **overrides: Further field overrides applied on top

        Returns:
            CostModel instance
        """
        base = cls(
            flush_remote_line=CALIBRATED_FLUSH_REMOTE_LINE,
            alloc_overhead=CALIBRATED_ALLOC_OVERHEAD,
        )
        return replace(base, **overrides) if overrides else base

    @classmethod
    def from_json(cls, path: Union[str, Path], calibrated: bool = False) -> 'CostModel':
        """
        Load field overrides from a JSON object file.

        Args:
            path: JSON file with a flat {field: number} object
            calibrated: Start from the calibrated model instead of the defaults

        Returns:
            CostModel instance

        Raises:
            ValueError: If the file names an unknown field
        """
        with open(path, 'r', encoding='utf-8') as fh:
            raw = json.load(fh)
        return cls._with_overrides(raw, calibrated)

    @classmethod
    def from_env(cls, env_file: str = '.env', calibrated: bool = False) -> 'CostModel':
        """
        Load overrides from CSM_COST_<FIELD> environment variables.

        Args:
            env_file: Path to .env file (default: '.env')
            calibrated: Start from the calibrated model instead of the defaults

        Returns:
            CostModel instance
        """
        load_dotenv(env_file)
        raw = {}
        for f in fields(cls):
            value = os.getenv(f"CSM_COST_{f.name.upper()}")
            if value is not None:
                raw[f.name] = float(value)
        return cls._with_overrides(raw, calibrated)

    @classmethod
    def _with_overrides(cls, raw: Dict[str, Any], calibrated: bool) -> 'CostModel':
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"Unknown cost model fields: {sorted(unknown)}")
        base = cls.calibrated() if calibrated else cls()
        return replace(base, **{k: float(v) for k, v in raw.items()})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def message_cost(self, wire_bytes: int, self_send: bool) -> float:
        """One-way ethernet message charge; self-sends are free."""
        if self_send:
            return 0.0
        return self.ethernet_msg_latency / 2 + wire_bytes * 1e9 / self.ethernet_bandwidth

    def event_cost(self, event: 'TraceEvent') -> float:
        """
        Charge for one trace event, derived from the event's own fields.

        Replaying every event of a trace through this method reproduces the
        ledger's simulated time.
        """
        from ..models.ledger import EventKind

        kind = event.op
        if kind in (EventKind.READ, EventKind.WRITE):
            return (event.local_lines * self.local_line_fetch
                    + event.remote_lines * self.remote_line_transfer
                    + event.round_trips * self.remote_rtt)
        if kind is EventKind.SNOOP:
            return event.snooped_lines * self.remote_line_transfer
        if kind is EventKind.FLUSH:
            return (event.cached_lines * self.flush_local_line
                    + event.remote_lines * self.flush_remote_line)
        if kind is EventKind.MSG:
            return self.message_cost(event.wire_bytes, event.peer == event.node)
        if kind is EventKind.ALLOC:
            return self.alloc_overhead
        if kind is EventKind.CODEC:
            return self.serialize_descriptor
        return 0.0
