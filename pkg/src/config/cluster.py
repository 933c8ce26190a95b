"""Cluster configuration management."""
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from ..models.memory import CoherenceLevel, SegmentMap
from .settings import Settings


def _optional_int(value: Optional[str]) -> Optional[int]:
    if value is None or value.strip() == '':
        return None
    return int(value)


@dataclass
class ClusterConfig:
    """
    Simulated cluster configuration.

    Attributes:
        nodes: Number of nodes
        segment_bytes: Memory each node lends to the cluster
        coherence: Coherence level of the simulated fabric
        cache_capacity: Lines per node cache (0 = unbounded)
        eviction_seed: Arms the cache adversary when set
        schedule_seed: Seeds message delivery order when set
        track_data: Store bytes (False = cost-only simulation)
        gap_bytes: Unowned bytes between consecutive segments
    """
    nodes: int = Settings.DEFAULT_NODES
    segment_bytes: int = Settings.DEFAULT_SEGMENT_BYTES
    coherence: CoherenceLevel = CoherenceLevel.LC_CSM
    cache_capacity: int = 0
    eviction_seed: Optional[int] = None
    schedule_seed: Optional[int] = None
    track_data: bool = True
    gap_bytes: int = 0

    @classmethod
    def from_env(cls, env_file: str = '.env') -> 'ClusterConfig':
        """
        Load cluster configuration from environment variables.

        Args:
            env_file: Path to .env file (default: '.env')

        Returns:
            ClusterConfig instance

        Raises:
            ValueError: If a variable cannot be parsed or the result is invalid
        """
        load_dotenv(env_file)
        config = cls(
            nodes=int(os.getenv('CSM_NODES', str(Settings.DEFAULT_NODES))),
            segment_bytes=int(os.getenv('CSM_SEGMENT_BYTES', str(Settings.DEFAULT_SEGMENT_BYTES))),
            coherence=CoherenceLevel.parse(os.getenv('CSM_COHERENCE', 'lc')),
            cache_capacity=int(os.getenv('CSM_CACHE_CAPACITY', '0')),
            eviction_seed=_optional_int(os.getenv('CSM_EVICTION_SEED')),
            schedule_seed=_optional_int(os.getenv('CSM_SCHEDULE_SEED')),
        )
        config.validate()
        return config

    def validate(self) -> None:
        """Raise ValueError on an unusable configuration."""
        if self.nodes < 1:
            raise ValueError(f"Cluster needs at least one node, got {self.nodes}")
        if self.segment_bytes <= 0 or self.segment_bytes % Settings.CACHE_LINE_SIZE:
            raise ValueError(
                f"segment_bytes must be a positive multiple of {Settings.CACHE_LINE_SIZE}")
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be non-negative")

    def segment_map(self) -> SegmentMap:
        """Equal-sized segments, node i at i * (segment_bytes + gap_bytes)."""
        return SegmentMap.uniform(self.nodes, self.segment_bytes, self.gap_bytes)
