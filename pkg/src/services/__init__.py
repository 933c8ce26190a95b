"""Cluster runtime, coherence protocol, descriptor codec and compute kernels."""
from .descriptor_ipc import deserialize_descriptor, serialize_descriptor
from .cluster_runtime import ClusterHandle, rt_spawn, spawn_cluster
from .protocol import CoherenceProtocol, ProtocolOptions
from .compute_service import ComputeService, compute_min_max, compute_sum

__all__ = [
    'deserialize_descriptor', 'serialize_descriptor',
    'ClusterHandle', 'rt_spawn', 'spawn_cluster',
    'CoherenceProtocol', 'ProtocolOptions',
    'ComputeService', 'compute_min_max', 'compute_sum',
]
