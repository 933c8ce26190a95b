"""Shared fixtures for the test suite."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config.cost_model import CostModel
from src.models.memory import SegmentMap
from src.repositories.csm_handle import CsmHandle
from src.services.cluster_runtime import rt_spawn
from src.services.protocol import CoherenceProtocol


LINE = 128
FIXTURES = Path(__file__).parent / 'fixtures'


@pytest.fixture
def segment_map():
    """Three nodes with 64 KiB each."""
    return SegmentMap.uniform(3, 64 * 1024)


@pytest.fixture
def csm(segment_map):
    return CsmHandle(segment_map)


@pytest.fixture
def cost_model():
    return CostModel()


@pytest.fixture
def make_cluster():
    """Factory: make_cluster(nodes, segment_bytes, schedule_seed=..., **CsmHandle options)."""
    def _make(nodes=3, segment_bytes=256 * 1024, schedule_seed=None, **options):
        handle = CsmHandle(SegmentMap.uniform(nodes, segment_bytes), **options)
        return rt_spawn(handle, schedule_seed=schedule_seed)
    return _make


@pytest.fixture
def cluster(make_cluster):
    return make_cluster()


@pytest.fixture
def protocol(cluster):
    return CoherenceProtocol(cluster)


def read_fixture(name: str) -> bytes:
    """Golden hex dump as bytes (whitespace ignored)."""
    return bytes.fromhex((FIXTURES / name).read_text(encoding='utf-8'))
