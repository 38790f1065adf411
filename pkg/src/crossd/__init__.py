"""crossd: continuous health monitoring and criticality scoring for OSS projects."""

__version__ = "0.1.0"
