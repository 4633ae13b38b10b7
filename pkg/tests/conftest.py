import math

import numpy as np
import pytest

from qmuse.rng import RngStream

GOLDEN_SEED = 20250611


@pytest.fixture
def rng():
    return RngStream(GOLDEN_SEED, "test")


def binomial_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


def sine(freq, seconds=1.0, sr=48000):
    return np.sin(2 * np.pi * freq * np.arange(int(seconds * sr)) / sr)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
