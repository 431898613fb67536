"""Cell and flower class vocabularies and the pairing between them.

The two enumerations are index-aligned: cell class i pairs with flower
class i in the default mapping. Index order is fixed and used for all
tie-breaking throughout the pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class CellClass(Enum):
    neutrophil = 0
    multinuclear = 1
    mast_cell = 2
    macrophage = 3
    lymphocyte = 4
    erythrocyte = 5
    eosinophil = 6

    @property
    def index(self) -> int:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "CellClass":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown cell class {name!r}") from None

    @classmethod
    def from_index(cls, index: int) -> "CellClass":
        return cls(index)


class FlowerClass(Enum):
    coltsfoot = 0
    buttercup = 1
    daisy = 2
    windflower = 3
    daffodil = 4
    crocus = 5
    sunflower = 6

    @property
    def index(self) -> int:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "FlowerClass":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown flower class {name!r}") from None

    @classmethod
    def from_index(cls, index: int) -> "FlowerClass":
        return cls(index)


def _default_pairs() -> tuple[tuple[CellClass, FlowerClass], ...]:
    return tuple((CellClass(i), FlowerClass(i)) for i in range(7))


@dataclass(frozen=True)
class ClassPairMap:
    """Bijection between the 7 cell classes and the 7 flower classes.

    The default pairing is index-aligned (neutrophil-coltsfoot,
    multinuclear-buttercup, mast_cell-daisy, macrophage-windflower,
    lymphocyte-daffodil, erythrocyte-crocus, eosinophil-sunflower).
    Alternative pairings can be supplied as long as they stay bijective.
    """

    pairs: tuple[tuple[CellClass, FlowerClass], ...] = field(default_factory=_default_pairs)

    def __post_init__(self) -> None:
        pairs = tuple(self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if len(pairs) != 7:
            raise ValueError(f"pairing must cover all 7 classes, got {len(pairs)} pairs")
        cells = {c for c, _ in pairs}
        flowers = {f for _, f in pairs}
        if len(cells) != 7 or len(flowers) != 7:
            raise ValueError("pairing must be a bijection: duplicate class on one side")

    def to_flower(self, cell: CellClass) -> FlowerClass:
        for c, f in self.pairs:
            if c is cell:
                return f
        raise ValueError(f"no pairing for {cell}")  # unreachable for a valid map

    def to_cell(self, flower: FlowerClass) -> CellClass:
        for c, f in self.pairs:
            if f is flower:
                return c
        raise ValueError(f"no pairing for {flower}")

    def as_dict(self) -> dict[str, str]:
        return {c.name: f.name for c, f in self.pairs}

    @classmethod
    def from_dict(cls, mapping: dict[str, str]) -> "ClassPairMap":
        pairs = tuple(
            (CellClass.from_name(c), FlowerClass.from_name(f)) for c, f in mapping.items()
        )
        return cls(pairs=pairs)


DEFAULT_PAIRING = ClassPairMap()

CELL_CLASS_NAMES = [c.name for c in CellClass]
FLOWER_CLASS_NAMES = [f.name for f in FlowerClass]
