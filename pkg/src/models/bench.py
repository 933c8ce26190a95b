"""Benchmark report records."""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

from ..config.settings import Settings


@dataclass
class BreakdownReport:
    """
    Simulated time per initialization component, in milliseconds.

    total is the sum of the six rows.
    """
    malloc_request: float
    pre_write_flush: float
    write_remote: float
    post_write_flush: float
    serialize_descriptor: float
    send_descriptor: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = sum(self.rows().values())

    @classmethod
    def from_phase_totals(cls, phase_ns: Dict[str, float]) -> 'BreakdownReport':
        """Group ledger phase totals (ns) into the six components (ms)."""
        rows = {}
        for component in Settings.BREAKDOWN_COMPONENTS:
            ns = sum(phase_ns.get(phase, 0.0) for phase in Settings.COMPONENT_PHASES[component])
            rows[component] = ns / 1e6
        return cls(**rows)

    def rows(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in Settings.BREAKDOWN_COMPONENTS}

    def ordering(self) -> List[str]:
        """Component names from largest to smallest."""
        return [name for name, _ in sorted(self.rows().items(), key=lambda kv: kv[1], reverse=True)]

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class TransferReport:
    """Result of sharing one table with another node."""
    method: str
    table_bytes: int
    bytes_on_wire: int
    simulated_time_ns: float
    throughput: float  # table bytes per simulated second

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class StridedReport:
    """Result of one strided read pass."""
    stride: int
    mode: str
    effective_throughput: float  # useful bytes per simulated second
    lines_touched: int
    useful_bytes: int
    simulated_ns: float
    link_utilization: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def component_order_holds(report: BreakdownReport, expected: Tuple[str, ...]) -> bool:
    """True when the components rank strictly in `expected` order."""
    rows = report.rows()
    values = [rows[name] for name in expected]
    return all(a > b for a, b in zip(values, values[1:]))
