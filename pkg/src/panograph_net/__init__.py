"""
PanoGraph Net

Message-passing dataflow over panorama graphs, its reference update
functions, and the training losses with finite-difference checks.
"""
