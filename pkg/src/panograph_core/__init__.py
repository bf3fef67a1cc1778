"""
PanoGraph Core Package

Pure domain logic for multi-view panorama pose estimation: planar pose
algebra, scene models and file formats, synthetic scenes, column-wise cue
synthesis and the pose-graph abstraction. Independent of any CLI.
"""

__version__ = "1.0.0"
