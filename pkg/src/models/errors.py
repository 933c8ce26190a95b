"""Exception hierarchy shared by every layer."""


class CsmError(Exception):
    """Base class for all errors raised by the cluster shared memory stack."""


class SegmentMapError(CsmError, ValueError):
    """Segment map violates disjointness, alignment or non-emptiness."""


class AddressRangeError(CsmError, ValueError):
    """Address range falls outside the cluster address space or into a gap."""


class AdversaryNotArmedError(CsmError, RuntimeError):
    """Adversary step requested on a handle created without an eviction seed."""


class RegionError(CsmError, ValueError):
    """Region is misaligned, empty or not inside its owner's segment."""


class OutOfMemoryError(CsmError, MemoryError):
    """No free span in the region can hold the request."""


class InvalidFreeError(CsmError, ValueError):
    """Free of an unknown or already freed address."""


class SealedObjectError(CsmError, PermissionError):
    """Mutation of a sealed (immutable) object."""


class UnsealedArrayError(CsmError, ValueError):
    """Read or serialization of an array that has not been sealed yet."""


class DescriptorFormatError(CsmError, ValueError):
    """Descriptor bytes or descriptor values are malformed."""


class SchemaMismatchError(CsmError, ValueError):
    """Columns or partitions do not conform to the schema."""


class ComputeError(CsmError, ValueError):
    """Kernel called on an unsupported dtype or on a column with no valid values."""


class IntegerOverflowError(CsmError, OverflowError):
    """Integer aggregate does not fit the column's dtype."""


class RpcTimeoutError(CsmError, TimeoutError):
    """A reply or acknowledgement never arrived."""


class ClusterShutdownError(CsmError, RuntimeError):
    """Message sent on a cluster that has been shut down."""
