"""Benchmark configuration."""
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from ..models.columnar import DataType
from .cost_model import CostModel
from .settings import Settings


MODES = ('local', 'remote')
METHODS = ('ethernet', 'csm')


@dataclass
class BenchConfig:
    """
    Benchmark run configuration.

    Attributes:
        nodes: Cluster size (at least 2)
        table_bytes: Size of the single-column table
        element_type: Column type (64-bit numeric)
        stride: Element stride of the strided read benchmark
        mode: 'local' (reader owns the memory) or 'remote'
        method: 'csm' (descriptor only) or 'ethernet' (full copy)
        seed: Seeds message scheduling and the generated values
        calibrated: Use the cost model fitted to the reference breakdown
        cost_model_file: JSON file with cost model overrides
    """
    nodes: int = Settings.DEFAULT_NODES
    table_bytes: int = Settings.DEFAULT_TABLE_BYTES
    element_type: DataType = DataType.UINT64
    stride: int = 1
    mode: str = 'remote'
    method: str = 'csm'
    seed: Optional[int] = None
    calibrated: bool = False
    cost_model_file: Optional[str] = None

    @classmethod
    def from_env(cls, env_file: str = '.env') -> 'BenchConfig':
        """
        Load benchmark defaults from CSM_BENCH_* environment variables.

        Args:
            env_file: Path to .env file (default: '.env')

        Returns:
            Validated BenchConfig
        """
        load_dotenv(env_file)
        seed = os.getenv('CSM_BENCH_SEED')
        config = cls(
            nodes=int(os.getenv('CSM_BENCH_NODES', str(Settings.DEFAULT_NODES))),
            table_bytes=int(os.getenv('CSM_BENCH_TABLE_BYTES', str(Settings.DEFAULT_TABLE_BYTES))),
            element_type=DataType.parse(os.getenv('CSM_BENCH_TYPE', 'uint64')),
            stride=int(os.getenv('CSM_BENCH_STRIDE', '1')),
            mode=os.getenv('CSM_BENCH_MODE', 'remote'),
            method=os.getenv('CSM_BENCH_METHOD', 'csm'),
            seed=int(seed) if seed else None,
            calibrated=os.getenv('CSM_BENCH_CALIBRATED', '').lower() in ('1', 'true', 'yes'),
            cost_model_file=os.getenv('CSM_BENCH_COST_MODEL') or None,
        )
        config.validate()
        return config

    def validate(self) -> None:
        """
        Check the configuration.

        Raises:
            ValueError: On the first invalid field
        """
        if self.nodes < 2:
            raise ValueError(f"Benchmarks need at least 2 nodes, got {self.nodes}")
        if not self.element_type.is_numeric:
            raise ValueError(f"Benchmarks need a 64-bit numeric type, got {self.element_type.name}")
        width = self.element_type.byte_width
        if self.table_bytes <= 0 or self.table_bytes % width:
            raise ValueError(f"table_bytes must be a positive multiple of {width}, got {self.table_bytes}")
        if self.stride < 1:
            raise ValueError(f"stride must be at least 1, got {self.stride}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @property
    def elements(self) -> int:
        return self.table_bytes // self.element_type.byte_width

    @property
    def track_data(self) -> bool:
        """Tables above the materialize limit run in cost-only mode."""
        return self.table_bytes <= Settings.MATERIALIZE_LIMIT_BYTES

    def cost_model(self) -> CostModel:
        if self.cost_model_file:
            return CostModel.from_json(self.cost_model_file, calibrated=self.calibrated)
        return CostModel.calibrated() if self.calibrated else CostModel()
