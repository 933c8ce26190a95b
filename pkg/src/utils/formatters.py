"""Formatting and parsing helpers for bench output."""
import logging
import re


logger = logging.getLogger(__name__)

_SIZE_UNITS = {
    '': 1, 'b': 1,
    'k': 1024, 'kb': 1024, 'kib': 1024,
    'm': 1024 ** 2, 'mb': 1024 ** 2, 'mib': 1024 ** 2,
    'g': 1024 ** 3, 'gb': 1024 ** 3, 'gib': 1024 ** 3,
}
_SIZE_PATTERN = re.compile(r'^\s*(\d+)\s*([a-zA-Z]*)\s*$')


class DataFormatter:
    """Formatter for sizes, simulated times and throughput."""

    @staticmethod
    def parse_size(text: str) -> int:
        """
        Parse a byte size such as '1GiB', '16MiB', '4096' or '64k'.

        Units are binary (1 KB = 1024 bytes).

        Args:
            text: Size string

        Returns:
            Size in bytes

        Raises:
            ValueError: If the string is not a size
        """
        match = _SIZE_PATTERN.match(str(text))
        if not match:
            raise ValueError(f"Invalid size: {text!r}")
        number, unit = match.groups()
        factor = _SIZE_UNITS.get(unit.lower())
        if factor is None:
            raise ValueError(f"Unknown size unit in {text!r}")
        return int(number) * factor

    @staticmethod
    def format_bytes(size: int) -> str:
        """Human-readable binary size."""
        for unit, factor in (('GiB', 1024 ** 3), ('MiB', 1024 ** 2), ('KiB', 1024)):
            if size >= factor:
                value = size / factor
                return f"{value:.0f} {unit}" if value == int(value) else f"{value:.2f} {unit}"
        return f"{size} B"

    @staticmethod
    def format_ms(ns: float, decimals: int = 3) -> str:
        """Simulated nanoseconds as a millisecond string."""
        return f"{ns / 1e6:.{decimals}f} ms"

    @staticmethod
    def format_throughput(bytes_per_second: float) -> str:
        gib = bytes_per_second / 1024 ** 3
        if gib >= 1:
            return f"{gib:.2f} GiB/s"
        return f"{bytes_per_second / 1024 ** 2:.2f} MiB/s"
