"""
Benchmark Report Generator

Runs the simulated benchmarks end to end and exports their results.
Thin facade over the cluster runtime and the coherence protocol.
"""
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from src.config.bench import BenchConfig
from src.config.settings import Settings
from src.models.bench import BreakdownReport, StridedReport, TransferReport
from src.models.columnar import ArrayDescriptor, Field, RecordBatchDescriptor, Schema
from src.models.ledger import EventKind
from src.models.memory import SegmentMap
from src.models.allocation import round_up_lines
from src.repositories.column_reader import ColumnReader
from src.repositories.csm_handle import CsmHandle
from src.services.cluster_runtime import ClusterHandle, rt_spawn
from src.services.protocol import CoherenceProtocol
from src.utils.formatters import DataFormatter

logger = logging.getLogger(__name__)

Report = Union[BreakdownReport, TransferReport, StridedReport]

WRITER = 1
OWNER = 0


class BenchReportGenerator:
    """
    High-level benchmark orchestrator.

    Every run builds a fresh simulated cluster sized for the table, so runs
    never share caches or ledgers.
    """

    def __init__(self, config: BenchConfig):
        """
        Initialize report generator.

        Args:
            config: Benchmark configuration (validated here)
        """
        config.validate()
        self.config = config
        self.cost_model = config.cost_model()
        self.cluster: Optional[ClusterHandle] = None
        logger.info(f"Report generator initialized: {config.nodes} nodes, "
                    f"{DataFormatter.format_bytes(config.table_bytes)}, calibrated={config.calibrated}")

    # ------------------------------------------------------------------
    # Benchmarks
    # ------------------------------------------------------------------

    def run_init_table(self) -> BreakdownReport:
        """
        Time the initialization of one table written remotely.

        Node 1 writes a single-column table into node 0's memory and
        publishes its descriptor. Every charge of the run is grouped into
        the six breakdown components.

        Returns:
            BreakdownReport in simulated milliseconds
        """
        logger.info("=" * 60)
        logger.info("INIT TABLE BENCHMARK")
        logger.info("=" * 60)

        logger.info("\nStep 1/3: Spawning cluster")
        sizes = [Settings.BENCH_PEER_SEGMENT_BYTES] * self.config.nodes
        sizes[OWNER] = self._table_segment_bytes()
        cluster = self._spawn(sizes)
        protocol = CoherenceProtocol(cluster)

        logger.info(f"\nStep 2/3: Writing table from node {WRITER} into node {OWNER}")
        mark = cluster.ledger.mark()
        array = protocol.build_fixed_array(WRITER, OWNER, self.config.element_type,
                                           self.config.elements, self._producer())
        batch = self._as_batch(array)

        logger.info("\nStep 3/3: Publishing descriptor")
        protocol.publish(WRITER, batch)

        report = BreakdownReport.from_phase_totals(cluster.ledger.phase_totals(since=mark))
        for name, ms in report.rows().items():
            logger.info(f"  {name:<22} {ms:10.3f} ms")
        logger.info(f"  {'total':<22} {report.total:10.3f} ms")
        return report

    def run_transfer(self, method: Optional[str] = None) -> TransferReport:
        """
        Share a table from node 0 with node 1.

        'csm' sends only the descriptor; 'ethernet' ships the whole table
        and rebuilds it in the receiver's memory.

        Args:
            method: Overrides the configured method

        Returns:
            TransferReport
        """
        method = method or self.config.method
        logger.info("=" * 60)
        logger.info(f"TRANSFER BENCHMARK ({method})")
        logger.info("=" * 60)

        logger.info("\nStep 1/3: Spawning cluster")
        cluster = self._spawn([self._table_segment_bytes()] * self.config.nodes)
        protocol = CoherenceProtocol(cluster)

        logger.info("\nStep 2/3: Building table on node 0")
        array = protocol.build_fixed_array(0, 0, self.config.element_type,
                                           self.config.elements, self._producer())
        batch = self._as_batch(array)

        logger.info(f"\nStep 3/3: Transferring to node 1 via {method}")
        mark = cluster.ledger.mark()
        if method == 'csm':
            protocol.publish(0, batch)
        elif method == 'ethernet':
            cluster.ethernet_full_copy(0, 1, batch)
        else:
            raise ValueError(f"Unknown transfer method: {method!r}")
        elapsed_ns = cluster.ledger.time_since(mark)
        wire = self._ethernet_bytes_since(cluster, mark)

        report = TransferReport(
            method=method,
            table_bytes=self.config.table_bytes,
            bytes_on_wire=wire,
            simulated_time_ns=elapsed_ns,
            throughput=self.config.table_bytes * 1e9 / elapsed_ns if elapsed_ns else float('inf'),
        )
        logger.info(f"  {method}: {DataFormatter.format_bytes(wire)} on wire, "
                    f"{DataFormatter.format_ms(elapsed_ns)}, "
                    f"{DataFormatter.format_throughput(report.throughput)}")
        return report

    def run_transfer_comparison(self, sizes: Optional[List[int]] = None) -> pd.DataFrame:
        """
        Both transfer methods for every table size, one row per run.

        Args:
            sizes: Table sizes in bytes (default: Settings.TRANSFER_SIZES)

        Returns:
            DataFrame of TransferReports plus the ethernet/csm time ratio
        """
        sizes = sizes or Settings.TRANSFER_SIZES
        rows = []
        for size in sizes:
            runner = BenchReportGenerator(replace(self.config, table_bytes=size))
            rows += [runner.run_transfer(method).to_dict() for method in ('csm', 'ethernet')]
        df = pd.DataFrame(rows)
        csm_ns = df[df['method'] == 'csm'].set_index('table_bytes')['simulated_time_ns']
        df['ratio_vs_csm'] = df['simulated_time_ns'] / df['table_bytes'].map(csm_ns)
        logger.info(f"\n{df.to_string(index=False)}")
        return df

    def run_strided(self, stride: Optional[int] = None, mode: Optional[str] = None) -> StridedReport:
        """
        Read every stride-th element of a table with cold caches.

        Args:
            stride: Overrides the configured stride
            mode: Overrides the configured mode ('local' reads on the owner)

        Returns:
            StridedReport
        """
        stride = stride or self.config.stride
        mode = mode or self.config.mode
        cluster, array = self._strided_table()
        return self._strided_pass(cluster, array, stride, mode)

    def run_strided_sweep(self, strides: Optional[List[int]] = None,
                          modes: tuple = ('local', 'remote')) -> pd.DataFrame:
        """
        One cold-cache pass per (mode, stride) over a single table.

        Returns:
            DataFrame with one StridedReport per row
        """
        strides = strides or Settings.BENCH_STRIDES
        logger.info("=" * 60)
        logger.info(f"STRIDED READ SWEEP: strides {strides}")
        logger.info("=" * 60)
        cluster, array = self._strided_table()
        rows = [self._strided_pass(cluster, array, stride, mode).to_dict()
                for mode in modes for stride in strides]
        df = pd.DataFrame(rows)
        logger.info(f"\n{df.to_string(index=False)}")
        return df

    # ------------------------------------------------------------------
    # Export
    # ------------------------------------------------------------------

    def export(self, result: Union[Report, pd.DataFrame], output_file: Union[str, Path]) -> Path:
        """
        Write a result as JSON, or as CSV when the file name ends in .csv.

        Args:
            result: A report or a sweep DataFrame
            output_file: Destination path

        Returns:
            Resolved output path
        """
        output_path = Path(output_file)
        frame = result if isinstance(result, pd.DataFrame) else pd.DataFrame([result.to_dict()])
        if output_path.suffix.lower() == '.csv':
            frame.to_csv(output_path, index=False, encoding='utf-8-sig')
        else:
            payload = (frame.to_dict(orient='records') if isinstance(result, pd.DataFrame)
                       else result.to_dict())
            with open(output_path, 'w', encoding='utf-8') as fh:
                json.dump(payload, fh, indent=2)
        logger.info(f"Report exported to: {output_path.absolute()}")
        return output_path

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _spawn(self, sizes: List[int]) -> ClusterHandle:
        csm = CsmHandle(SegmentMap.from_sizes(sizes), self.cost_model,
                        track_data=self.config.track_data)
        self.cluster = rt_spawn(csm, schedule_seed=self.config.seed)
        return self.cluster

    def _table_segment_bytes(self) -> int:
        return round_up_lines(self.config.table_bytes, Settings.CACHE_LINE_SIZE) \
            + Settings.BENCH_METADATA_BYTES

    def _producer(self) -> Optional[np.ndarray]:
        """Random table contents, or None (zeros, never stored) in cost-only runs."""
        if not self.config.track_data:
            return None
        rng = np.random.default_rng(self.config.seed)
        dtype = self.config.element_type.numpy_dtype
        if np.issubdtype(dtype, np.floating):
            values = rng.random(self.config.elements)
        else:
            values = rng.integers(0, 1 << 32, size=self.config.elements)
        return values.astype(dtype)

    def _as_batch(self, array: ArrayDescriptor) -> RecordBatchDescriptor:
        schema = Schema.of(Field(Settings.BENCH_COLUMN_NAME, self.config.element_type, nullable=False))
        return RecordBatchDescriptor(schema=schema, num_rows=array.length, columns=(array,))

    def _strided_table(self):
        cluster = self._spawn([self._table_segment_bytes()] * self.config.nodes)
        protocol = CoherenceProtocol(cluster)
        array = protocol.build_fixed_array(OWNER, OWNER, self.config.element_type,
                                           self.config.elements, self._producer())
        return cluster, array

    def _strided_pass(self, cluster: ClusterHandle, array: ArrayDescriptor,
                      stride: int, mode: str) -> StridedReport:
        if stride < 1:
            raise ValueError(f"stride must be at least 1, got {stride}")
        if mode not in ('local', 'remote'):
            raise ValueError(f"Unknown mode: {mode!r}")
        reader = OWNER if mode == 'local' else WRITER
        for node in cluster.node_ids:
            cluster.csm.flush_range(node, array.data.addr, array.data.length)

        mark = cluster.ledger.mark()
        rows = np.arange(0, array.length, stride, dtype=np.int64)
        ColumnReader(cluster.csm, reader).take(array, rows)
        events = [e for e in cluster.ledger.events_since(mark)
                  if e.op in (EventKind.READ, EventKind.SNOOP)]
        lines = sum(e.local_lines + e.remote_lines + e.snooped_lines for e in events)
        elapsed_ns = cluster.ledger.time_since(mark)
        useful = int(rows.size) * self.config.element_type.byte_width

        seconds = elapsed_ns / 1e9
        link_bytes = lines * Settings.CACHE_LINE_SIZE if mode == 'remote' else 0
        report = StridedReport(
            stride=stride,
            mode=mode,
            effective_throughput=useful / seconds if seconds else 0.0,
            lines_touched=lines,
            useful_bytes=useful,
            simulated_ns=elapsed_ns,
            link_utilization=(link_bytes / seconds / self.cost_model.csm_link_bandwidth
                              if seconds else 0.0),
        )
        logger.info(f"  stride {stride:>5} ({mode}): {lines} lines, "
                    f"{DataFormatter.format_throughput(report.effective_throughput)}")
        return report

    @staticmethod
    def _ethernet_bytes_since(cluster: ClusterHandle, mark: int) -> int:
        return sum(e.wire_bytes for e in cluster.ledger.events_since(mark)
                   if e.op is EventKind.MSG and e.peer != e.node)
