"""Numerics for matrix weights, degenerate elliptic equations and mappings of finite distortion."""

__version__ = "0.1.0"
