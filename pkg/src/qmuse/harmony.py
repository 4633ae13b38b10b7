"""Note clouds whose chord membership is decided by single qubit measurements."""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import qcore
from .rng import RngStream

DEFAULT_REGISTER = (48, 84)
DEFAULT_NOTE_RATE = 16.0


class HarmonyError(ValueError):
    pass


_LETTERS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_NOTE_RE = re.compile(r"^([A-Ga-g])([#b]*)$")


def parse_note_name(name: str) -> int:
    """Pitch class of a note name such as ``"Ab"``, ``"F#"`` or ``"C"``."""
    m = _NOTE_RE.match(name.strip())
    if not m:
        raise HarmonyError(f"unknown note name {name!r}")
    letter, accidentals = m.groups()
    pc = _LETTERS[letter.upper()] + accidentals.count("#") - accidentals.count("b")
    return pc % 12


@dataclass(frozen=True)
class Chord:
    name: str
    pitch_classes: frozenset[int]

    def __post_init__(self):
        pcs = frozenset(self.pitch_classes)
        if not pcs:
            raise HarmonyError(f"chord {self.name!r} has no pitch classes")
        if any(not isinstance(p, int) or not 0 <= p <= 11 for p in pcs):
            raise HarmonyError(f"chord {self.name!r} pitch classes must be integers in 0..11")
        object.__setattr__(self, "pitch_classes", pcs)

    @classmethod
    def from_names(cls, names: str | Iterable[str], name: str | None = None) -> Chord:
        if isinstance(names, str):
            parts = [p for p in names.split(",") if p.strip()]
        else:
            parts = list(names)
        if not parts:
            raise HarmonyError("empty chord")
        label = name if name is not None else "-".join(p.strip() for p in parts)
        return cls(label, frozenset(parse_note_name(p) for p in parts))


BDIM7 = Chord("Bdim7", frozenset({11, 2, 5, 8}))
CMAJ = Chord("C", frozenset({0, 4, 7}))


@dataclass(frozen=True)
class CrossfadeSchedule:
    """Probability of chord B over time, linear between breakpoints."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bps = tuple((float(t), float(p)) for t, p in self.breakpoints)
        if not bps:
            raise HarmonyError("schedule needs at least one breakpoint")
        for i, (t, p) in enumerate(bps):
            if not math.isfinite(t):
                raise HarmonyError(f"breakpoint {i}: time must be finite")
            if not 0.0 <= p <= 1.0:
                raise HarmonyError(f"breakpoint {i}: probability {p} outside [0, 1]")
            if i and t < bps[i - 1][0]:
                raise HarmonyError(f"breakpoint {i}: times must be nondecreasing")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, p_b: float) -> CrossfadeSchedule:
        return cls(((0.0, p_b),))

    @classmethod
    def parse(cls, text: str) -> CrossfadeSchedule:
        """Parse ``"t:p,t:p,..."``."""
        pairs = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                t, p = item.split(":")
                pairs.append((float(t), float(p)))
            except ValueError:
                raise HarmonyError(f"bad schedule entry {item!r}; expected t:p") from None
        return cls(tuple(pairs))


RAMP_SCHEDULE = CrossfadeSchedule(((0.0, 0.0), (0.5, 0.0), (1.5, 1.0), (2.0, 1.0)))


def probability_at(schedule: CrossfadeSchedule, t: float) -> float:
    if not math.isfinite(t):
        raise HarmonyError(f"time must be finite, got {t!r}")
    bps = schedule.breakpoints
    times = [b[0] for b in bps]
    if t <= times[0]:
        return bps[0][1]
    if t >= times[-1]:
        return bps[-1][1]
    j = bisect.bisect_right(times, t)
    (t0, p0), (t1, p1) = bps[j - 1], bps[j]
    if t1 == t0:
        return p1
    return p0 + (p1 - p0) * (t - t0) / (t1 - t0)


def choose_chord(p_b: float, rng: RngStream) -> str:
    """``"A"`` on measuring 0, ``"B"`` on measuring 1."""
    outcome = qcore.measure_once(qcore.prepare_rx(p_b), rng)
    return "B" if outcome == "1" else "A"


def chord_tones_in_range(chord: Chord, lo: int, hi: int) -> list[int]:
    if not (0 <= lo <= hi <= 127):
        raise HarmonyError(f"register {lo}..{hi} must satisfy 0 <= lo <= hi <= 127")
    tones = [m for m in range(lo, hi + 1) if m % 12 in chord.pitch_classes]
    if not tones:
        raise HarmonyError(f"chord {chord.name!r} has no tones in {lo}..{hi}")
    return tones


def choose_pitch(chord: Chord, register: tuple[int, int], rng: RngStream) -> int:
    tones = chord_tones_in_range(chord, *register)
    return tones[int(rng.integers(0, len(tones)))]


@dataclass(frozen=True)
class CloudSpec:
    chord_a: Chord
    chord_b: Chord
    schedule: CrossfadeSchedule
    duration_s: float
    note_rate_hz: float = DEFAULT_NOTE_RATE
    register: tuple[int, int] = DEFAULT_REGISTER
    note_length_s: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise HarmonyError("duration_s must be positive")
        if not (math.isfinite(self.note_rate_hz) and self.note_rate_hz > 0):
            raise HarmonyError("note_rate_hz must be positive")
        lo, hi = self.register
        chord_tones_in_range(self.chord_a, lo, hi)
        chord_tones_in_range(self.chord_b, lo, hi)
        if self.note_length_s is None:
            object.__setattr__(self, "note_length_s", 2.0 / self.note_rate_hz)
        elif not self.note_length_s > 0:
            raise HarmonyError("note_length_s must be positive")

    @property
    def note_count(self) -> int:
        # tolerate float noise in duration * rate, e.g. 0.3 * 10
        return int(math.floor(self.duration_s * self.note_rate_hz + 1e-9))


@dataclass(frozen=True)
class CloudNote:
    onset_s: float
    midi_note: int
    chord_tag: str
    duration_s: float = field(default=0.0, compare=False)


def generate_cloud(spec: CloudSpec, rng: RngStream) -> list[CloudNote]:
    """One qubit measurement and one pitch draw per isochronous note.

    Note ``i`` uses stream ``rng.derive("note", i)``.
    """
    notes = []
    for i in range(spec.note_count):
        onset = i / spec.note_rate_hz
        stream = rng.derive("note", i)
        tag = choose_chord(probability_at(spec.schedule, onset), stream)
        chord = spec.chord_a if tag == "A" else spec.chord_b
        notes.append(CloudNote(onset, choose_pitch(chord, spec.register, stream), tag, spec.note_length_s))
    return notes


def b_fraction(notes: Sequence[CloudNote]) -> float:
    return sum(n.chord_tag == "B" for n in notes) / len(notes) if notes else float("nan")
