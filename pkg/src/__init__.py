"""
CSM Columnar - Main Package

Zero-copy columnar tables on simulated locally-coherent cluster shared memory.
"""
__version__ = "0.3.0"
