"""Configuration module for cost model and application settings."""
from .cost_model import CostModel
from .settings import Settings

__all__ = ['CostModel', 'Settings']
