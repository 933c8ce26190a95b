"""Allocation bookkeeping records."""
from dataclasses import dataclass

from ..config.settings import Settings


def round_up_lines(size: int, line_size: int = Settings.CACHE_LINE_SIZE) -> int:
    """Round a byte count up to a whole number of cache lines."""
    return -(-size // line_size) * line_size


@dataclass
class AllocRecord:
    """One live allocation inside a Region."""
    addr: int
    requested: int
    reserved: int
    sealed: bool = False

    @property
    def end(self) -> int:
        return self.addr + self.reserved

    def to_dict(self) -> dict:
        return {
            'addr': self.addr,
            'requested': self.requested,
            'reserved': self.reserved,
            'sealed': self.sealed,
        }
