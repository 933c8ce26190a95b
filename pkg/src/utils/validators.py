"""Invariant checks for descriptors and allocator state."""
import logging
from typing import TYPE_CHECKING, Any, Dict, Optional

import numpy as np

from ..models.columnar import ArrayDescriptor, DataType
from ..models.errors import DescriptorFormatError


if TYPE_CHECKING:
    from ..repositories.shared_region import Region


logger = logging.getLogger(__name__)


class DescriptorValidator:
    """Validator for array descriptors and the buffers they reference."""

    @staticmethod
    def validate_structure(array: ArrayDescriptor) -> None:
        """
        Check everything that can be checked without reading memory.

        Args:
            array: Descriptor to check

        Raises:
            DescriptorFormatError: On the first violated invariant
        """
        if array.length < 0 or array.null_count < 0:
            raise DescriptorFormatError("Negative length or null count")
        if array.null_count > array.length:
            raise DescriptorFormatError(
                f"null_count {array.null_count} exceeds length {array.length}")

        if array.null_count > 0:
            if array.validity is None:
                raise DescriptorFormatError("Array has nulls but no validity buffer")
            if array.validity.length < (array.length + 7) // 8:
                raise DescriptorFormatError(
                    f"Validity buffer of {array.validity.length} bytes is too short "
                    f"for {array.length} rows")
        elif array.validity is not None:
            raise DescriptorFormatError("Validity buffer present but null_count is 0")

        if array.dtype is DataType.UTF8:
            if array.offsets is None:
                raise DescriptorFormatError("Utf8 array without offsets buffer")
            if array.offsets.length < 4 * (array.length + 1):
                raise DescriptorFormatError(
                    f"Offsets buffer of {array.offsets.length} bytes is too short "
                    f"for {array.length} rows")
        else:
            if array.offsets is not None:
                raise DescriptorFormatError(f"{array.dtype.name} array must not have offsets")
            needed = array.dtype.data_bytes(array.length)
            if array.data.length < needed:
                raise DescriptorFormatError(
                    f"Data buffer of {array.data.length} bytes is too short, need {needed}")

    @staticmethod
    def validate_content(array: ArrayDescriptor, validity_bits: Optional[np.ndarray],
                         offsets: Optional[np.ndarray]) -> None:
        """
        Check buffer contents against the descriptor.

        Args:
            array: Descriptor the buffers belong to
            validity_bits: Unpacked validity of the first `length` rows, or None
            offsets: Decoded Utf8 offsets (length + 1 values), or None

        Raises:
            DescriptorFormatError: If null_count or offsets are inconsistent
        """
        if validity_bits is not None:
            nulls = int(array.length - np.count_nonzero(validity_bits))
            if nulls != array.null_count:
                raise DescriptorFormatError(
                    f"null_count {array.null_count} disagrees with validity bitmap ({nulls} nulls)")
        if offsets is not None:
            if offsets.size and offsets[0] != 0:
                raise DescriptorFormatError(f"First Utf8 offset is {offsets[0]}, expected 0")
            if (np.diff(offsets) < 0).any():
                raise DescriptorFormatError("Utf8 offsets are not monotonically non-decreasing")
            if offsets.size and offsets[-1] > array.data.length:
                raise DescriptorFormatError(
                    f"Last Utf8 offset {offsets[-1]} exceeds data buffer length {array.data.length}")

    @staticmethod
    def region_report(region: 'Region') -> Dict[str, Any]:
        """
        Check allocator invariants and return a report.

        Returns:
            Dictionary with conservation, overlap and alignment results
        """
        spans = [(region.base + off, region.base + off + length) for off, length in region.free_list]
        spans += [(r.addr, r.end) for r in region.allocations.values()]
        spans.sort()

        report = {
            'conserved': region.free_bytes() + sum(r.reserved for r in region.allocations.values())
            == region.size,
            'overlaps': sum(1 for a, b in zip(spans, spans[1:]) if b[0] < a[1]),
            'misaligned': sum(1 for addr in region.allocations if addr % region.line_size),
            'covered': bool(spans) and spans[0][0] == region.base and spans[-1][1] == region.end
            and all(a[1] == b[0] for a, b in zip(spans, spans[1:])),
        }

        if not report['conserved'] or report['overlaps'] or report['misaligned'] or not report['covered']:
            logger.warning(f"Region of node {region.owner} violates allocator invariants: {report}")
        return report
