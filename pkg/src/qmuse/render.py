"""Mix spatialized notes into multichannel audio and write WAV, JSON and MIDI."""

from __future__ import annotations

import io
import json
import math
import struct
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from . import spatial, timbre
from .rng import RngStream
from .spatial import Position
from .timbre import NoteSpec

EVENTS_SCHEMA_VERSION = 1
TICKS_PER_QUARTER = 480
NOTE_VELOCITY = 96
DEFAULT_TAIL_S = 0.25
NORMALIZE_PEAK = 0.99

LAYOUT_CHANNELS = {"stereo": 2, "cube8": 8}


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneEvent:
    onset_s: float
    note: NoteSpec
    position: Position
    event_index: int
    midi: int | None = None
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.onset_s) and self.onset_s >= 0):
            raise RenderError(f"event {self.event_index}: onset must be finite and >= 0")


@dataclass(frozen=True)
class Scene:
    events: tuple[SceneEvent, ...]
    layout: str = "stereo"
    sample_rate_hz: int = timbre.DEFAULT_SAMPLE_RATE
    master_seed: int = 0
    tail_s: float = DEFAULT_TAIL_S

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.layout not in LAYOUT_CHANNELS:
            raise RenderError(f"unknown layout {self.layout!r}; expected one of {sorted(LAYOUT_CHANNELS)}")
        if not (math.isfinite(self.tail_s) and self.tail_s >= 0):
            raise RenderError("tail_s must be finite and >= 0")
        seen = set()
        for ev in self.events:
            if ev.event_index in seen:
                raise RenderError(f"duplicate event_index {ev.event_index}")
            seen.add(ev.event_index)


@dataclass(frozen=True, eq=False)
class MultiBuffer:
    """Audio as an array of shape ``(channels, frames)``."""

    data: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim == 1:
            d = d[np.newaxis, :]
        if d.ndim != 2 or not 1 <= d.shape[0] <= 8:
            raise RenderError(f"expected 1..8 channels, got array of shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise RenderError("samples must be finite")
        object.__setattr__(self, "data", d)

    @property
    def channel_count(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    def peak(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def pan_gains(position: Position, layout: str) -> np.ndarray:
    if layout == "stereo":
        return spatial.pan_stereo(position.x).as_array()
    if layout == "cube8":
        return spatial.pan_cube(position)
    raise RenderError(f"unknown layout {layout!r}")


def _synthesize(scene: Scene, ev: SceneEvent) -> np.ndarray:
    rng = RngStream(scene.master_seed, "event", ev.event_index)
    return timbre.synth_note(ev.note, rng, scene.sample_rate_hz).samples


def render_scene(scene: Scene, workers: int = 1) -> MultiBuffer:
    """Synthesize, pan and mix every event.

    Synthesis may run on ``workers`` threads; mixing is always serial in
    ascending ``event_index`` so the result does not depend on ``workers``.
    """
    sr = scene.sample_rate_hz
    nyquist = sr / 2
    for ev in scene.events:
        if ev.note.freq_hz >= nyquist:
            raise RenderError(
                f"event {ev.event_index}: frequency {ev.note.freq_hz} Hz is not below Nyquist ({nyquist} Hz)"
            )
    ordered = sorted(scene.events, key=lambda e: e.event_index)
    starts = [int(round(ev.onset_s * sr)) for ev in ordered]
    ends = [s + timbre.sample_count(ev.note.duration_s, sr) for s, ev in zip(starts, ordered)]
    total = max(ends, default=0) + timbre.sample_count(scene.tail_s, sr)

    if workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            voices = list(pool.map(lambda e: _synthesize(scene, e), ordered))
    else:
        voices = [_synthesize(scene, e) for e in ordered]

    mix = np.zeros((LAYOUT_CHANNELS[scene.layout], total), dtype=np.float64)
    for ev, start, voice in zip(ordered, starts, voices):
        gains = pan_gains(ev.position, scene.layout)
        mix[:, start:start + voice.shape[0]] += gains[:, np.newaxis] * voice[np.newaxis, :]
    return MultiBuffer(mix, sr)


def clip_guard(buffer: MultiBuffer, mode: str = "clip") -> MultiBuffer:
    """``"clip"`` saturates at +-1; ``"normalize"`` rescales to a 0.99 peak if over 1."""
    mode = mode.lower()
    if mode == "clip":
        return MultiBuffer(np.clip(buffer.data, -1.0, 1.0), buffer.sample_rate_hz)
    if mode == "normalize":
        peak = buffer.peak()
        if peak > 1.0:
            return MultiBuffer(buffer.data * (NORMALIZE_PEAK / peak), buffer.sample_rate_hz)
        return buffer
    raise ValueError(f"unknown clip mode {mode!r}")


def quantize(data: np.ndarray, bit_depth: int) -> np.ndarray:
    """Symmetric PCM quantization, rounding half away from zero."""
    full_scale = {16: 32767, 24: 8388607}[bit_depth]
    x = np.clip(np.asarray(data, dtype=np.float64), -1.0, 1.0) * full_scale
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int32)


def wav_bytes(buffer: MultiBuffer, bit_depth: int = 16) -> bytes:
    """Encode as RIFF/WAVE PCM with interleaved little-endian samples."""
    if bit_depth not in (16, 24):
        raise ValueError(f"bit_depth must be 16 or 24, got {bit_depth!r}")
    ints = quantize(buffer.data, bit_depth).T  # frames x channels, interleaved on ravel
    if bit_depth == 16:
        payload = ints.astype("<i2").tobytes()
    else:
        raw = ints.astype("<i4").reshape(-1, 1).view(np.uint8)
        payload = raw[:, :3].tobytes()
    out = io.BytesIO()
    with wave.open(out, "wb") as w:
        w.setnchannels(buffer.channel_count)
        w.setsampwidth(bit_depth // 8)
        w.setframerate(buffer.sample_rate_hz)
        w.writeframes(payload)
    return out.getvalue()


def write_wav(buffer: MultiBuffer, path: str | PathLike, bit_depth: int = 16) -> None:
    data = wav_bytes(buffer, bit_depth)
    with open(path, "wb") as fh:
        fh.write(data)


def read_wav(path: str | PathLike) -> tuple[np.ndarray, int, int]:
    """Return ``(ints[channels, frames], sample_rate, bit_depth)``."""
    with wave.open(str(path), "rb") as w:
        channels, width, sr, frames = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
        payload = w.readframes(frames)
    if width == 2:
        ints = np.frombuffer(payload, dtype="<i2").astype(np.int32)
    elif width == 3:
        b = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    else:
        raise ValueError(f"unsupported sample width {width}")
    return ints.reshape(frames, channels).T, sr, width * 8


@dataclass(frozen=True)
class NoteEvent:
    """A note as exported to JSON and MIDI."""

    onset_s: float
    duration_s: float
    midi: int | None = None
    freq_hz: float | None = None
    position: Position = field(default_factory=Position)
    tags: tuple[str, ...] = ()

    @classmethod
    def from_scene_event(cls, ev: SceneEvent) -> NoteEvent:
        return cls(ev.onset_s, ev.note.duration_s, ev.midi, ev.note.freq_hz, ev.position, ev.tags)


def _num(v: float | None, places: int = 6):
    return None if v is None else round(float(v), places)


def events_document(events: Iterable[NoteEvent], seed: int, extra: dict | None = None) -> dict:
    doc = {
        "version": EVENTS_SCHEMA_VERSION,
        "seed": int(seed),
        "events": [
            {
                "onset_s": _num(e.onset_s),
                "duration_s": _num(e.duration_s),
                "midi": e.midi,
                "freq_hz": _num(e.freq_hz),
                "position": {"x": _num(e.position.x), "y": _num(e.position.y), "z": _num(e.position.z)},
                "tags": list(e.tags),
            }
            for e in events
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def dumps_stable(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_events_json(
    events: Iterable[NoteEvent], path: str | PathLike, seed: int = 0, extra: dict | None = None
) -> None:
    """Write the events document: sorted keys, numbers rounded to 6 decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_stable(events_document(events, seed, extra)))


def _vlq(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def seconds_to_ticks(t: float, tempo_bpm: float) -> int:
    return int(round(t * tempo_bpm / 60.0 * TICKS_PER_QUARTER))


def midi_bytes(events: Sequence[NoteEvent], tempo_bpm: float, channel: int = 0) -> bytes:
    """Standard MIDI File, format 0, one track, 480 ticks per quarter note."""
    if not (math.isfinite(tempo_bpm) and tempo_bpm > 0):
        raise ValueError(f"tempo must be positive, got {tempo_bpm!r}")
    msgs = []  # (tick, order, status, data1, data2); note-offs sort before note-ons
    for i, e in enumerate(events):
        if e.midi is None:
            raise ValueError(f"event {i} has no MIDI pitch")
        if not 0 <= e.midi <= 127:
            raise ValueError(f"event {i}: MIDI pitch {e.midi} out of range")
        on = seconds_to_ticks(e.onset_s, tempo_bpm)
        off = max(on + 1, seconds_to_ticks(e.onset_s + e.duration_s, tempo_bpm))
        msgs.append((on, 1, 0x90 | channel, e.midi, NOTE_VELOCITY))
        msgs.append((off, 0, 0x80 | channel, e.midi, 0))
    msgs.sort()

    usec_per_quarter = int(round(60_000_000 / tempo_bpm))
    track = bytearray()
    if msgs:
        track += b"\x00\xff\x51\x03" + usec_per_quarter.to_bytes(3, "big")
    last = 0
    for tick, _, status, d1, d2 in msgs:
        track += _vlq(tick - last) + bytes((status, d1, d2))
        last = tick
    track += b"\x00\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_QUARTER)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def write_midi(events: Sequence[NoteEvent], path: str | PathLike, tempo_bpm: float, channel: int = 0) -> None:
    data = midi_bytes(events, tempo_bpm, channel)
    with open(path, "wb") as fh:
        fh.write(data)
