"""Memory access layer: the CSM simulator, owner regions and column reads."""
from .csm_handle import CsmHandle, csm_create
from .shared_region import Region, region_create
from .column_reader import ColumnReader

__all__ = ['CsmHandle', 'csm_create', 'Region', 'region_create', 'ColumnReader']
