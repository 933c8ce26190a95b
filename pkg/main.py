"""
CSM Columnar - Benchmark Entry Point

Reproduces the table initialization breakdown, the transfer comparison and
the strided read experiment in simulated time.

Usage:
    python main.py init-table --size 1GiB --type uint64 --calibrated
    python main.py transfer --method ethernet --size 16MiB
    python main.py strided --stride 16 --mode remote --out strided.csv
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.config.bench import METHODS, MODES, BenchConfig
from src.config.settings import Settings
from src.models.columnar import DataType
from src.models.errors import CsmError
from src.reports.report_generator import BenchReportGenerator
from src.utils.formatters import DataFormatter


logger = logging.getLogger(__name__)


def setup_logging(verbose: bool) -> None:
    """Log to the console and to Settings.LOG_FILE."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(Settings.LOG_FILE, encoding='utf-8')
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='bench', description="Cluster shared memory columnar benchmarks (simulated time)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--nodes", type=int, default=Settings.DEFAULT_NODES,
                        help=f"Cluster size (default: {Settings.DEFAULT_NODES})")
    common.add_argument("--size", type=DataFormatter.parse_size,
                        default=Settings.DEFAULT_TABLE_BYTES,
                        help="Table size, e.g. 16MiB or 1GiB (default: 16MiB)")
    common.add_argument("--type", dest="element_type", type=DataType.parse,
                        default=DataType.UINT64, help="Element type (default: uint64)")
    common.add_argument("--calibrated", action="store_true",
                        help="Use the cost model fitted to the reference breakdown")
    common.add_argument("--cost-model", dest="cost_model_file", default=None,
                        help="JSON file with cost model overrides")
    common.add_argument("--seed", type=int, default=None, help="Scheduling and data seed")
    common.add_argument("--out", default=None, help="Write the report to .json or .csv")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("init-table", parents=[common], help="Table initialization breakdown")

    transfer = sub.add_parser("transfer", parents=[common], help="Descriptor vs full-copy transfer")
    transfer.add_argument("--method", choices=METHODS, default='csm')
    transfer.add_argument("--compare", action="store_true",
                          help="Run both methods over the standard table sizes")

    strided = sub.add_parser("strided", parents=[common], help="Strided read throughput")
    strided.add_argument("--stride", type=int, default=1, help="Element stride (default: 1)")
    strided.add_argument("--mode", choices=MODES, default='remote')
    strided.add_argument("--sweep", action="store_true",
                         help="Run every standard stride in both modes")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = BenchConfig(
            nodes=args.nodes,
            table_bytes=args.size,
            element_type=args.element_type,
            stride=getattr(args, 'stride', 1),
            mode=getattr(args, 'mode', 'remote'),
            method=getattr(args, 'method', 'csm'),
            seed=args.seed,
            calibrated=args.calibrated,
            cost_model_file=args.cost_model_file,
        )
        generator = BenchReportGenerator(config)

        if args.command == 'init-table':
            result = generator.run_init_table()
        elif args.command == 'transfer':
            result = generator.run_transfer_comparison() if args.compare else generator.run_transfer()
        else:
            result = generator.run_strided_sweep() if args.sweep else generator.run_strided()

        if args.out:
            generator.export(result, args.out)
        else:
            logger.info(f"Result: {result if hasattr(result, 'to_string') else result.to_dict()}")
        return 0

    except CsmError as e:
        logger.error(f"Simulation failed: {e}", exc_info=True)
        return 1
    except ValueError as e:
        logger.error(f"Invalid configuration: {e}")
        return 2
    except Exception as e:
        logger.error(f"Error in main execution: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
