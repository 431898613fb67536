"""cellbloom: per-class cell/flower image translation with cycle
consistency, a classifier-based transfer check, and a gamified
annotation service."""

__version__ = "0.1.0"

from .labels import CellClass, ClassPairMap, FlowerClass  # noqa: F401
