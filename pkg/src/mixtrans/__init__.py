"""Mixed ray transforms on conformally Euclidean disks."""

__version__ = "0.1.0"
