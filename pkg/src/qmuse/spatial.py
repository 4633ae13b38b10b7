"""Constant-intensity panning and shot-noise perturbation of event positions.

Cube corners are indexed ``(x_bit << 2) | (y_bit << 1) | z_bit``: corner 0 is
left/back/down, corner 7 is right/front/up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qcore
from .rng import RngStream

EDGE_EPSILON = 0.01


class SpatialError(ValueError):
    pass


def _check_unit(name: str, v: float) -> float:
    if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and 0.0 <= v <= 1.0):
        raise SpatialError(f"{name} must be a number in [0, 1], got {v!r}")
    return float(v)


@dataclass(frozen=True)
class Position:
    x: float = 0.5
    y: float = 0.5
    z: float = 0.5

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class StereoGains:
    left: float
    right: float

    def as_array(self) -> np.ndarray:
        return np.array([self.left, self.right])


@dataclass(frozen=True)
class PathSpec:
    start: Position
    end: Position
    event_count: int = 32

    def __post_init__(self):
        if not isinstance(self.event_count, int) or self.event_count < 1:
            raise SpatialError(f"event_count must be >= 1, got {self.event_count!r}")


def _axis_gains(c: float) -> tuple[float, float]:
    # cos(c*pi/2) written as sin((1-c)*pi/2): exact zeros at the edges and
    # bit-equal gains at the centre
    return math.sin((1.0 - c) * math.pi / 2), math.sin(c * math.pi / 2)


def pan_stereo(x: float) -> StereoGains:
    left, right = _axis_gains(_check_unit("x", x))
    return StereoGains(left, right)


def pan_cube(pos: Position) -> np.ndarray:
    """Eight corner gains; the sum of squares is 1 for every position."""
    gx, gy, gz = (_axis_gains(c) for c in pos.as_tuple())
    return np.array(
        [gx[(k >> 2) & 1] * gy[(k >> 1) & 1] * gz[k & 1] for k in range(8)]
    )


def pan_quad(pos: Position) -> np.ndarray:
    """Four floor-corner gains (the cube's z = 0 face), indexed ``(x_bit << 1) | y_bit``."""
    gx, gy = _axis_gains(pos.x), _axis_gains(pos.y)
    return np.array([gx[(k >> 1) & 1] * gy[k & 1] for k in range(4)])


def linear_path(spec: PathSpec) -> list[Position]:
    n = spec.event_count
    if n == 1:
        return [spec.start]
    a, b = np.array(spec.start.as_tuple()), np.array(spec.end.as_tuple())
    out = []
    for k in range(n):
        if k == n - 1:
            out.append(spec.end)
            continue
        f = k / (n - 1)
        # clip guards 1 + 1e-16 style overshoot
        out.append(Position(*np.clip(a + (b - a) * f, 0.0, 1.0).tolist()))
    return out


def perturb_coordinate(p: float, shots: int, rng: RngStream, edge_clamp: bool = False) -> float:
    """Fraction of ``shots`` measurements of Rx(p)|0> that read 1."""
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise SpatialError(f"shots must be a positive integer, got {shots!r}")
    if edge_clamp:
        p = min(max(p, EDGE_EPSILON), 1.0 - EDGE_EPSILON)
    counts = qcore.measure_shots(qcore.prepare_rx(p), int(shots), rng)
    return qcore.count_ones(counts) / shots


def perturb(pos: Position, shots: int, rng: RngStream, edge_clamp: bool = False) -> Position:
    """Re-estimate each coordinate from a finite number of shots.

    Results are multiples of ``1/shots``. Coordinates of exactly 0 or 1 do not
    move unless ``edge_clamp`` pulls them ``EDGE_EPSILON`` inside the cube.
    """
    return Position(
        *(
            perturb_coordinate(c, shots, rng.derive(axis), edge_clamp)
            for axis, c in zip("xyz", pos.as_tuple())
        )
    )


def shots_profile(shots: int | Sequence[int], count: int) -> list[int]:
    if isinstance(shots, (int, np.integer)):
        profile = [int(shots)] * count
    else:
        profile = [int(s) for s in shots]
        if len(profile) == 1:
            profile = profile * count
        elif len(profile) != count:
            raise SpatialError(
                f"shots profile has {len(profile)} entries for {count} events; expected 1 or {count}"
            )
    for s in profile:
        if s < 1:
            raise SpatialError(f"shots must be >= 1, got {s}")
    return profile


def perturb_path(
    positions: Sequence[Position],
    shots: int | Sequence[int],
    rng: RngStream,
    edge_clamp: bool = False,
) -> list[Position]:
    """Perturb every event; event ``i`` uses ``rng.derive("event", i)``."""
    profile = shots_profile(shots, len(positions))
    return [
        perturb(pos, s, rng.derive("event", i), edge_clamp)
        for i, (pos, s) in enumerate(zip(positions, profile))
    ]


def swell_profile(count: int, low: int = 4, high: int = 4096) -> list[int]:
    """Shots rising geometrically from ``low`` at the ends to ``high`` mid-path.

    Few shots scatter events widely, so the path disperses at both ends and
    tightens in the middle.
    """
    if count == 1:
        return [high]
    out = []
    for k in range(count):
        u = 1.0 - abs(2.0 * k / (count - 1) - 1.0)
        out.append(int(round(low * (high / low) ** u)))
    return out
