"""Skeleton-joint repair and model-based gait recognition for flash-lidar pose data."""

__version__ = "0.1.0"
