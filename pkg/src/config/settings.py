"""Application settings and constants."""
from typing import Dict, List, Tuple


KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB


class Settings:
    """Application-wide settings and constants."""

    # Memory geometry
    CACHE_LINE_SIZE = 128  # Power9 line size, used for every alignment rule

    # Cluster defaults
    DEFAULT_NODES = 2
    DEFAULT_SEGMENT_BYTES = 1 * MIB

    # Descriptor wire format
    WIRE_MAGIC = b'CSMT'
    WIRE_VERSION = 1
    KIND_RECORD_BATCH = 1
    KIND_TABLE = 2
    EAGER_DESCRIPTOR_VALIDATION = False

    # Benchmark defaults
    DEFAULT_TABLE_BYTES = 16 * MIB
    MATERIALIZE_LIMIT_BYTES = 64 * MIB  # larger tables run in cost-only mode
    BENCH_PEER_SEGMENT_BYTES = 1 * MIB
    BENCH_METADATA_BYTES = 1 * MIB
    BENCH_COLUMN_NAME = 'values'
    BENCH_STRIDES: List[int] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]
    TRANSFER_SIZES: List[int] = [1 * MIB, 16 * MIB, 256 * MIB]

    # Breakdown components, in report order
    BREAKDOWN_COMPONENTS: List[str] = [
        'malloc_request',
        'pre_write_flush',
        'write_remote',
        'post_write_flush',
        'serialize_descriptor',
        'send_descriptor',
    ]

    # Ledger phases that make up each component
    COMPONENT_PHASES: Dict[str, Tuple[str, ...]] = {
        'malloc_request': ('allocation',),
        'pre_write_flush': ('clear',),
        'write_remote': ('write',),
        'post_write_flush': ('flush_if_remote',),
        'serialize_descriptor': ('serialize',),
        'send_descriptor': ('seal', 'publish'),
    }

    # Output files
    LOG_FILE = 'csm_bench.log'

    @staticmethod
    def get_component_for_phase(phase: str) -> str:
        """Map a ledger phase name back to its breakdown component."""
        for component, phases in Settings.COMPONENT_PHASES.items():
            if phase in phases:
                return component
        raise KeyError(f"Phase '{phase}' is not part of any breakdown component")
