"""
PanoGraph App Services

Batch pipelines that tie the core, solver and evaluation packages together.
"""
