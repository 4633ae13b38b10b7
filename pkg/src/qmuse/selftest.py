"""Fast health checks run by ``qmuse selftest``."""

from __future__ import annotations

import random
import time
from typing import Callable

import numpy as np

from . import qcore, rhythm, spatial
from .rng import RngStream


def check_rx_round_trip() -> str | None:
    for k in range(101):
        p = k / 100
        got = qcore.probability_of_one(qcore.prepare_rx(p))
        if abs(got - p) >= 1e-12:
            return f"p={p}: measured probability {got!r}"
    return None


def check_pan_power(
    pan_stereo: Callable = spatial.pan_stereo, pan_cube: Callable = spatial.pan_cube, n: int = 2000
) -> str | None:
    r = random.Random(12345)
    for _ in range(n):
        x, y, z = r.random(), r.random(), r.random()
        g = pan_stereo(x)
        stereo = g.left**2 + g.right**2
        cube = float(np.sum(np.asarray(pan_cube(spatial.Position(x, y, z))) ** 2))
        if abs(stereo - 1) >= 1e-9 or abs(cube - 1) >= 1e-9:
            return f"gains at ({x:.4f}, {y:.4f}, {z:.4f}) sum to {stereo!r} / {cube!r}"
    return None


def check_clave_fixed_bits(realizations: int = 200) -> str | None:
    t = rhythm.son_clave_template()
    if (len(t), rhythm.mutable_count(t), rhythm.realization_count(t)) != (32, 13, 8192):
        return "son clave template has the wrong shape"
    ones, zeros = t.indices(rhythm.Cell.FIXED1), t.indices(rhythm.Cell.FIXED0)
    for i in range(realizations):
        bits = rhythm.realize(t, 0.5, RngStream(i, "selftest")).bits
        if any(bits[j] != 1 for j in ones) or any(bits[j] != 0 for j in zeros):
            return f"seed {i} changed a fixed cell"
    return None


CHECKS: dict[str, Callable[[], str | None]] = {
    "rx angle round trip": check_rx_round_trip,
    "constant-power panning": check_pan_power,
    "son clave fixed cells": check_clave_fixed_bits,
}


def run(checks: dict[str, Callable[[], str | None]] | None = None, echo: Callable[[str], None] = print) -> bool:
    """Run each check, print one line per check, return True if all pass."""
    ok = True
    for name, fn in (checks or CHECKS).items():
        t0 = time.perf_counter()
        try:
            problem = fn()
        except Exception as exc:  # a crashing check is a failed check
            problem = f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        status = "PASS" if problem is None else "FAIL"
        line = f"{status}  {name} ({dt:.2f} s)"
        if problem is not None:
            ok = False
            line += f": {problem}"
        echo(line)
    return ok

