"""Vision-only crop-row exit pipeline with a deterministic RGB-D simulator.

The package covers the full halt-control loop: local-feature similarity
scoring between a reference crop and live frames, depth-based headland span
estimation, the three-state traversal machine, a synthetic pinhole world for
seeded trials, and a CLI harness that batches trials and aggregates errors.
"""

__version__ = "0.1.0"
