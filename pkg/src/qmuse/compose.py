"""Declarative composition configs and the scene builder behind ``qmuse compose``.

A config is a YAML document::

    seed: 2025
    sample_rate: 48000
    tempo_bpm: 112
    layout: stereo          # or cube8
    tail_s: 0.25
    clip_mode: normalize    # or clip
    sections:
      - type: rhythm        # template, p, repeats, instrument, position | path
      - type: cloud         # chord_a, chord_b, schedule, duration_s, ..., path, shots
      - type: path          # start, end, event_count, shots, interval_s, instrument

``qmuse/configs/example.yaml`` exercises every section type.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import harmony, rhythm, spatial, timbre
from .render import NoteEvent, Scene, SceneEvent
from .rng import RngStream
from .spatial import Position


class ConfigError(ValueError):
    """Invalid compose configuration; ``problems`` lists every offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in problems))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


Unit = Annotated[float, Field(ge=0.0, le=1.0)]
Triple = tuple[Unit, Unit, Unit]
Shots = Union[Annotated[int, Field(ge=1)], list[Annotated[int, Field(ge=1)]]]


class InstrumentConfig(_Model):
    freq_hz: Annotated[float, Field(gt=0)] = 880.0
    midi: Annotated[int, Field(ge=0, le=127)] | None = None
    duration_s: Annotated[float, Field(gt=0)] = 0.25
    envelope: Literal["percussive", "sustained"] = "sustained"
    window_ms: Annotated[float, Field(gt=0)] = 60.0
    attack_ms: Annotated[float, Field(ge=0)] = 10.0
    release_ms: Annotated[float, Field(ge=0)] = 10.0
    collision_rate_hz: Annotated[float, Field(ge=0.1, le=10000)] = 50.0
    amplitude: Annotated[float, Field(gt=0, le=1)] = 0.5

    def envelope_spec(self) -> timbre.Envelope:
        if self.envelope == "percussive":
            return timbre.Percussive(self.window_ms)
        return timbre.Sustained(self.attack_ms, self.release_ms)

    def note(self, freq_hz: float | None = None, duration_s: float | None = None) -> timbre.NoteSpec:
        return timbre.NoteSpec(
            freq_hz if freq_hz is not None else self.freq_hz,
            duration_s if duration_s is not None else self.duration_s,
            self.envelope_spec(),
            timbre.ParticleNoiseParams(self.collision_rate_hz, self.amplitude),
        )

    def envelope_fits(self, duration_s: float) -> str | None:
        need = self.window_ms if self.envelope == "percussive" else self.attack_ms + self.release_ms
        if need / 1000.0 > duration_s + 1e-12:
            return f"envelope needs {need} ms but notes last {duration_s * 1000:g} ms"
        return None


class PathConfig(_Model):
    start: Triple = (0.0, 0.5, 0.5)
    end: Triple = (1.0, 0.5, 0.5)
    shots: Shots | None = None
    edge_clamp: bool = False


def _default_percussion() -> InstrumentConfig:
    return InstrumentConfig(
        freq_hz=1500.0, duration_s=0.08, envelope="percussive", window_ms=60.0, collision_rate_hz=200.0
    )


class RhythmSection(_Model):
    type: Literal["rhythm"]
    start_s: Annotated[float, Field(ge=0)] = 0.0
    template: str = rhythm.SON_CLAVE_TEXT
    p: Unit = 0.5
    repeats: Annotated[int, Field(ge=1)] = 1
    instrument: InstrumentConfig = Field(default_factory=_default_percussion)
    position: Triple | None = None
    path: PathConfig | None = None

    @field_validator("template")
    @classmethod
    def _template_parses(cls, v: str) -> str:
        rhythm.parse_template(v)
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.position is not None and self.path is not None:
            raise ValueError("give either position or path, not both")
        if self.path is not None and isinstance(self.path.shots, list):
            raise ValueError("path.shots must be a single integer for rhythm sections")
        msg = self.instrument.envelope_fits(self.instrument.duration_s)
        if msg:
            raise ValueError(f"instrument: {msg}")
        return self


class CloudSection(_Model):
    type: Literal["cloud"]
    start_s: Annotated[float, Field(ge=0)] = 0.0
    chord_a: str = "B,D,F,Ab"
    chord_b: str = "C,E,G"
    schedule: list[tuple[float, Unit]] = [(0.0, 0.0), (0.5, 0.0), (1.5, 1.0), (2.0, 1.0)]
    duration_s: Annotated[float, Field(gt=0)] = 2.0
    note_rate_hz: Annotated[float, Field(gt=0)] = harmony.DEFAULT_NOTE_RATE
    register_: tuple[Annotated[int, Field(ge=0, le=127)], Annotated[int, Field(ge=0, le=127)]] = Field(
        harmony.DEFAULT_REGISTER, alias="register"
    )
    note_length_s: Annotated[float, Field(gt=0)] | None = None
    instrument: InstrumentConfig = Field(default_factory=InstrumentConfig)
    path: PathConfig | None = None
    position: Triple | None = None

    @field_validator("chord_a", "chord_b")
    @classmethod
    def _chord_parses(cls, v: str) -> str:
        harmony.Chord.from_names(v)
        return v

    @field_validator("schedule")
    @classmethod
    def _schedule_valid(cls, v):
        harmony.CrossfadeSchedule(tuple(v))
        return v

    @model_validator(mode="after")
    def _check(self):
        problems = []
        if self.position is not None and self.path is not None:
            problems.append("give either position or path, not both")
        try:
            spec = self.cloud_spec()
        except harmony.HarmonyError as exc:
            raise ValueError(str(exc)) from None
        if spec.note_count < 1:
            problems.append("duration_s * note_rate_hz yields no notes")
        if self.path is not None and isinstance(self.path.shots, list):
            if len(self.path.shots) not in (1, spec.note_count):
                problems.append(
                    f"path.shots profile has {len(self.path.shots)} entries for {spec.note_count} notes"
                )
        msg = self.instrument.envelope_fits(spec.note_length_s)
        if msg:
            problems.append(f"instrument: {msg}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def cloud_spec(self) -> harmony.CloudSpec:
        return harmony.CloudSpec(
            harmony.Chord.from_names(self.chord_a),
            harmony.Chord.from_names(self.chord_b),
            harmony.CrossfadeSchedule(tuple(self.schedule)),
            self.duration_s,
            self.note_rate_hz,
            tuple(self.register_),
            self.note_length_s,
        )


class PathSection(_Model):
    type: Literal["path"]
    start_s: Annotated[float, Field(ge=0)] = 0.0
    start: Triple = (0.0, 0.5, 0.5)
    end: Triple = (1.0, 0.5, 0.5)
    event_count: Annotated[int, Field(ge=1)] = 32
    shots: Shots = 256
    edge_clamp: bool = False
    interval_s: Annotated[float, Field(gt=0)] = 0.125
    instrument: InstrumentConfig = Field(default_factory=lambda: InstrumentConfig(duration_s=0.1))

    @model_validator(mode="after")
    def _check(self):
        problems = []
        if isinstance(self.shots, list) and len(self.shots) not in (1, self.event_count):
            problems.append(f"shots profile has {len(self.shots)} entries for {self.event_count} events")
        msg = self.instrument.envelope_fits(self.instrument.duration_s)
        if msg:
            problems.append(f"instrument: {msg}")
        if problems:
            raise ValueError("; ".join(problems))
        return self


Section = Annotated[Union[RhythmSection, CloudSection, PathSection], Field(discriminator="type")]


class ComposeConfig(_Model):
    seed: Annotated[int, Field(ge=0, lt=2**64)] = 0
    sample_rate: Annotated[int, Field(ge=8000, le=384000)] = timbre.DEFAULT_SAMPLE_RATE
    tempo_bpm: Annotated[float, Field(gt=0)] = 120.0
    layout: Literal["stereo", "cube8"] = "stereo"
    tail_s: Annotated[float, Field(ge=0)] = 0.25
    clip_mode: Literal["clip", "normalize"] = "normalize"
    sections: Annotated[list[Section], Field(min_length=1)]

    @model_validator(mode="after")
    def _nyquist(self):
        nyq = self.sample_rate / 2
        bad = []
        for i, sec in enumerate(self.sections):
            if isinstance(sec, CloudSection):
                top = timbre.midi_to_hz(sec.register_[1])
                if top >= nyq:
                    bad.append(f"sections.{i}.register: top note {top:.1f} Hz is not below Nyquist ({nyq} Hz)")
            elif sec.instrument.freq_hz >= nyq:
                bad.append(f"sections.{i}.instrument.freq_hz: {sec.instrument.freq_hz} Hz is not below Nyquist ({nyq} Hz)")
        if bad:
            raise ValueError("; ".join(bad))
        return self


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<config>"
        msg = err["msg"].removeprefix("Value error, ")
        out.append(f"{loc}: {msg}")
    return out


def parse_config(data: dict) -> ComposeConfig:
    try:
        return ComposeConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path) -> ComposeConfig:
    """Read and validate a YAML config. Raises ``OSError`` or ``ConfigError``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<config>: not valid YAML ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["<config>: top level must be a mapping"])
    return parse_config(data)


@dataclass
class _Builder:
    config: ComposeConfig
    events: list[SceneEvent]

    def add(self, onset: float, note: timbre.NoteSpec, pos: Position, midi=None, tags=()):
        self.events.append(SceneEvent(onset, note, pos, len(self.events), midi, tuple(tags)))


def _positions(count: int, position, path: PathConfig | None, rng: RngStream) -> list[Position]:
    if path is None:
        return [Position(*(position or (0.5, 0.5, 0.5)))] * count
    base = spatial.linear_path(spatial.PathSpec(Position(*path.start), Position(*path.end), max(count, 1)))
    base = base[:count]
    if path.shots is None:
        return base
    return spatial.perturb_path(base, path.shots, rng, path.edge_clamp)


def _rhythm(b: _Builder, sec: RhythmSection, rng: RngStream) -> None:
    template = rhythm.parse_template(sec.template)
    span = rhythm.template_duration(template, b.config.tempo_bpm)
    hits = []
    for r in range(sec.repeats):
        real = rhythm.realize(template, sec.p, rng.derive("realization", r))
        for ev in rhythm.events(real, b.config.tempo_bpm):
            hits.append((sec.start_s + r * span + ev.onset_seconds, r, ev.cell_index))
    positions = _positions(len(hits), sec.position, sec.path, rng.derive("perturb"))
    note = sec.instrument.note()
    for (onset, r, cell), pos in zip(hits, positions):
        b.add(onset, note, pos, sec.instrument.midi, ("rhythm", f"repeat:{r}", f"cell:{cell}"))


def _cloud(b: _Builder, sec: CloudSection, rng: RngStream) -> None:
    spec = sec.cloud_spec()
    notes = harmony.generate_cloud(spec, rng.derive("cloud"))
    positions = _positions(len(notes), sec.position, sec.path, rng.derive("perturb"))
    for n, pos in zip(notes, positions):
        note = sec.instrument.note(timbre.midi_to_hz(n.midi_note), n.duration_s)
        b.add(sec.start_s + n.onset_s, note, pos, n.midi_note, ("cloud", f"chord:{n.chord_tag}"))


def _path(b: _Builder, sec: PathSection, rng: RngStream) -> None:
    base = spatial.linear_path(spatial.PathSpec(Position(*sec.start), Position(*sec.end), sec.event_count))
    moved = spatial.perturb_path(base, sec.shots, rng.derive("perturb"), sec.edge_clamp)
    note = sec.instrument.note()
    for k, pos in enumerate(moved):
        b.add(sec.start_s + k * sec.interval_s, note, pos, sec.instrument.midi, ("path", f"step:{k}"))


_BUILDERS = {"rhythm": _rhythm, "cloud": _cloud, "path": _path}


def build_scene(config: ComposeConfig, seed: int | None = None) -> Scene:
    """Turn every section into scene events, in section order."""
    seed = config.seed if seed is None else seed
    root = RngStream(seed, "compose")
    b = _Builder(config, [])
    for k, sec in enumerate(config.sections):
        _BUILDERS[sec.type](b, sec, root.derive("section", k))
    return Scene(tuple(b.events), config.layout, config.sample_rate, seed, config.tail_s)


def scene_note_events(scene: Scene) -> list[NoteEvent]:
    return [NoteEvent.from_scene_event(ev) for ev in sorted(scene.events, key=lambda e: e.event_index)]
