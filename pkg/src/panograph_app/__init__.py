"""
PanoGraph Application Package

Command-line driver and batch services built on the core packages.
"""
