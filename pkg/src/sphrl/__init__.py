"""2D weakly compressible SPH with fluid-structure interaction and built-in
actor-critic reinforcement learning for active flow control."""

__version__ = "0.1.0"
