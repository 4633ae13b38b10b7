"""Rhythm templates on a temporal grid with qubit-decided mutable cells."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from . import qcore
from .rng import RngStream

SON_CLAVE_TEXT = "1001 0x1x 0x1x 10xx | 100x 0x10 0x1x xx0x"
SON_CLAVE_16 = "1001001000101000"
MAX_MUTABLE = 62


class TemplateError(ValueError):
    pass


class Cell(enum.Enum):
    FIXED0 = "0"
    FIXED1 = "1"
    MUTABLE = "x"


@dataclass(frozen=True)
class RhythmTemplate:
    cells: tuple[Cell, ...]
    cells_per_beat: int = 4
    beats_per_measure: int = 4

    def __post_init__(self):
        if not self.cells:
            raise TemplateError("template has no cells")
        if self.cells_per_beat < 1 or self.beats_per_measure < 1:
            raise TemplateError("cells_per_beat and beats_per_measure must be >= 1")

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def text(self) -> str:
        return "".join(c.value for c in self.cells)

    @property
    def fixed_count(self) -> int:
        return len(self.cells) - mutable_count(self)

    def indices(self, kind: Cell) -> list[int]:
        return [i for i, c in enumerate(self.cells) if c is kind]


@dataclass(frozen=True)
class RhythmRealization:
    bits: tuple[int, ...]
    template: RhythmTemplate = field(repr=False)

    def __post_init__(self):
        if len(self.bits) != len(self.template):
            raise TemplateError("realization length differs from its template")
        for i, (b, c) in enumerate(zip(self.bits, self.template.cells)):
            if (c is Cell.FIXED1 and b != 1) or (c is Cell.FIXED0 and b != 0):
                raise TemplateError(f"bit {i} contradicts fixed cell {c.value!r}")

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class RhythmEvent:
    onset_seconds: float
    cell_index: int


def parse_template(text: str, cells_per_beat: int = 4, beats_per_measure: int = 4) -> RhythmTemplate:
    """Parse ``'0'``, ``'1'`` and ``'x'`` cells; spaces and ``'|'`` are layout only."""
    cells = []
    for pos, ch in enumerate(text):
        if ch in " |":
            continue
        if ch == "0":
            cells.append(Cell.FIXED0)
        elif ch == "1":
            cells.append(Cell.FIXED1)
        elif ch in "xX":
            cells.append(Cell.MUTABLE)
        else:
            raise TemplateError(f"illegal character {ch!r} at position {pos}")
    if not cells:
        raise TemplateError("template has no cells")
    return RhythmTemplate(tuple(cells), cells_per_beat, beats_per_measure)


def son_clave_template() -> RhythmTemplate:
    """Two measures of son clave, 13 of the 32 sixteenths left to measurement."""
    return parse_template(SON_CLAVE_TEXT)


def mutable_count(template: RhythmTemplate) -> int:
    return sum(1 for c in template.cells if c is Cell.MUTABLE)


def realization_count(template: RhythmTemplate) -> int:
    k = mutable_count(template)
    if k > MAX_MUTABLE:
        raise TemplateError(f"{k} mutable cells exceeds the supported maximum of {MAX_MUTABLE}")
    return 2**k


def _cell_probability(p: float | Mapping[int, float], index: int, default: float) -> float:
    if isinstance(p, Mapping):
        return p.get(index, default)
    return p


def realize(
    template: RhythmTemplate,
    p: float | Mapping[int, float] = 0.5,
    rng: RngStream | None = None,
    *,
    default_p: float = 0.5,
) -> RhythmRealization:
    """Measure one qubit per mutable cell to decide event (1) or rest (0).

    ``p`` is either one probability for every mutable cell or a mapping from
    cell index to probability; unmapped cells use ``default_p``. Each cell
    draws from its own stream ``rng.derive("cell", index)``.
    """
    if rng is None:
        raise TypeError("realize needs an RngStream")
    probs = {}
    for i in template.indices(Cell.MUTABLE):
        pi = _cell_probability(p, i, default_p)
        qcore.rx_angle_for_probability(pi)  # validates
        probs[i] = pi
    bits = []
    for i, c in enumerate(template.cells):
        if c is Cell.FIXED1:
            bits.append(1)
        elif c is Cell.FIXED0:
            bits.append(0)
        else:
            outcome = qcore.measure_once(qcore.prepare_rx(probs[i]), rng.derive("cell", i))
            bits.append(int(outcome))
    return RhythmRealization(tuple(bits), template)


def events(realization: RhythmRealization, tempo_bpm: float) -> list[RhythmEvent]:
    if not math.isfinite(tempo_bpm) or tempo_bpm <= 0:
        raise TemplateError(f"tempo must be a positive finite number, got {tempo_bpm!r}")
    beat = 60.0 / tempo_bpm
    cpb = realization.template.cells_per_beat
    return [
        RhythmEvent(i / cpb * beat, i) for i, b in enumerate(realization.bits) if b == 1
    ]


def template_duration(template: RhythmTemplate, tempo_bpm: float) -> float:
    return len(template) / template.cells_per_beat * 60.0 / tempo_bpm
