"""Desk-scale simulator for layout sharding, MPMD scheduling and HBM/DRAM offload planning."""

__version__ = "0.1.0"
