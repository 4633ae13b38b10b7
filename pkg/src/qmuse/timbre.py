"""Particle-tracking noise, ring modulation and note envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .rng import RngStream

DEFAULT_SAMPLE_RATE = 48000


class TimbreError(ValueError):
    pass


@dataclass(frozen=True)
class ParticleNoiseParams:
    collision_rate_hz: float = 50.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.1 <= self.collision_rate_hz <= 10000:
            raise TimbreError(f"collision_rate_hz must be in [0.1, 10000], got {self.collision_rate_hz!r}")
        if not 0 < self.amplitude <= 1:
            raise TimbreError(f"amplitude must be in (0, 1], got {self.amplitude!r}")


@dataclass(frozen=True)
class Percussive:
    window_ms: float

    def __post_init__(self):
        if not self.window_ms > 0:
            raise TimbreError(f"window_ms must be positive, got {self.window_ms!r}")


@dataclass(frozen=True)
class Sustained:
    attack_ms: float = 10.0
    release_ms: float = 10.0

    def __post_init__(self):
        if not (self.attack_ms >= 0 and self.release_ms >= 0):
            raise TimbreError("attack_ms and release_ms must be nonnegative")


Envelope = Union[Percussive, Sustained]


@dataclass(frozen=True)
class NoteSpec:
    freq_hz: float
    duration_s: float
    envelope: Envelope = Sustained()
    noise: ParticleNoiseParams = ParticleNoiseParams()

    def __post_init__(self):
        if not (math.isfinite(self.freq_hz) and self.freq_hz > 0):
            raise TimbreError(f"freq_hz must be positive, got {self.freq_hz!r}")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise TimbreError(f"duration_s must be positive, got {self.duration_s!r}")


@dataclass(frozen=True, eq=False)
class SampleBuffer:
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise TimbreError("samples must be one-dimensional")
        if s.size and (not np.all(np.isfinite(s)) or np.max(np.abs(s)) > 1.0):
            raise TimbreError("samples must be finite and within [-1, 1]")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def sample_count(duration_s: float, sample_rate: int) -> int:
    return int(round(duration_s * sample_rate))


def particle_breakpoints(
    duration_s: float, params: ParticleNoiseParams, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Collision times and displacements; the last time lies past ``duration_s``.

    The first breakpoint sits at t = 0. Inter-arrival gaps are exponential,
    so the interior collisions form a Poisson process.
    """
    if not duration_s > 0:
        raise TimbreError(f"duration must be positive, got {duration_s!r}")
    scale = 1.0 / params.collision_rate_hz
    times = [0.0]
    t = 0.0
    chunk = max(16, int(duration_s * params.collision_rate_hz * 1.2) + 8)
    while t <= duration_s:
        gaps = rng.exponential(scale, chunk)
        for g in gaps:
            t += g
            times.append(t)
            if t > duration_s:
                break
    times = np.asarray(times)
    a = params.amplitude
    values = rng.uniform(-a, a, times.shape[0])
    return times, values


def particle_track(
    duration_s: float,
    params: ParticleNoiseParams,
    rng: RngStream,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> SampleBuffer:
    """Piecewise-linear random walk between collision points (lowpass noise)."""
    times, values = particle_breakpoints(duration_s, params, rng)
    t = np.arange(sample_count(duration_s, sample_rate)) / sample_rate
    return SampleBuffer(sample_rate, np.interp(t, times, values))


def ring_modulate(buffer: SampleBuffer, carrier_hz: float, phase_rad: float = 0.0) -> SampleBuffer:
    sr = buffer.sample_rate_hz
    if not (math.isfinite(carrier_hz) and 0 <= carrier_hz < sr / 2):
        raise TimbreError(f"carrier {carrier_hz!r} Hz must be below Nyquist ({sr / 2} Hz)")
    n = np.arange(len(buffer))
    return SampleBuffer(sr, buffer.samples * np.sin(2 * np.pi * carrier_hz * n / sr + phase_rad))


def envelope_curve(envelope: Envelope, n: int, sample_rate: int) -> np.ndarray:
    """Gain curve of length ``n`` for ``envelope``."""
    w = np.ones(n)
    if isinstance(envelope, Percussive):
        m = sample_count(envelope.window_ms / 1000.0, sample_rate)
        if m > n:
            raise TimbreError(f"window of {m} samples exceeds buffer of {n}")
        w[:] = 0.0
        if m == 1:
            return w
        k = np.arange(m)
        w[:m] = 0.5 - 0.5 * np.cos(2 * np.pi * k / (m - 1))
        return w
    a = sample_count(envelope.attack_ms / 1000.0, sample_rate)
    r = sample_count(envelope.release_ms / 1000.0, sample_rate)
    if a + r > n:
        raise TimbreError(f"attack + release ({a + r} samples) exceed buffer of {n}")
    if a:
        w[:a] = np.arange(a) / a
    if r:
        w[n - r:] = np.arange(r - 1, -1, -1) / r
    return w


def apply_envelope(buffer: SampleBuffer, envelope: Envelope) -> SampleBuffer:
    curve = envelope_curve(envelope, len(buffer), buffer.sample_rate_hz)
    return SampleBuffer(buffer.sample_rate_hz, buffer.samples * curve)


def synth_note(spec: NoteSpec, rng: RngStream, sample_rate: int = DEFAULT_SAMPLE_RATE) -> SampleBuffer:
    """Noise band centred on ``spec.freq_hz`` shaped by the note's envelope."""
    if spec.freq_hz >= sample_rate / 2:
        raise TimbreError(f"note frequency {spec.freq_hz} Hz is not below Nyquist ({sample_rate / 2} Hz)")
    track = particle_track(spec.duration_s, spec.noise, rng.derive("track"), sample_rate)
    return apply_envelope(ring_modulate(track, spec.freq_hz), spec.envelope)


def spectral_centroid(buffer: SampleBuffer, weighting: str = "power") -> float:
    """Mean frequency of the one-sided DFT, weighted by ``|X|**2`` or ``|X|``.

    Power weighting is the default: particle-track corners leave a heavy
    ``|X|`` tail that drags a magnitude-weighted centroid far above the band.
    """
    if len(buffer) == 0:
        raise TimbreError("empty buffer")
    if weighting not in ("power", "magnitude"):
        raise TimbreError(f"weighting must be 'power' or 'magnitude', got {weighting!r}")
    mag = np.abs(np.fft.rfft(buffer.samples))
    if weighting == "power":
        mag = mag**2
    total = mag.sum()
    if total == 0:
        raise TimbreError("all-zero buffer has no spectral centroid")
    freqs = np.fft.rfftfreq(len(buffer), 1.0 / buffer.sample_rate_hz)
    return float((freqs * mag).sum() / total)


def midi_to_hz(midi_note: int) -> float:
    if not isinstance(midi_note, (int, np.integer)) or not 0 <= midi_note <= 127:
        raise TimbreError(f"midi note must be an integer in 0..127, got {midi_note!r}")
    return 440.0 * 2.0 ** ((midi_note - 69) / 12)
