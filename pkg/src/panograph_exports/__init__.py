"""
PanoGraph Exports Package

Handles the generation of external artefacts (metrics CSV, top-down SVG).
"""
