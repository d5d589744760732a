from datetime import datetime, timedelta

import hypothesis
import numpy as np
import pytest

from hahnfit.basis import BasisCache, Lattice, build_basis

hypothesis.settings.register_profile(
    "suite", max_examples=40, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("suite")

_shared_cache = BasisCache(directory=None)


@pytest.fixture(scope="session")
def basis_cache():
    return _shared_cache


@pytest.fixture(scope="session")
def basis_101_full():
    return build_basis(Lattice.equidistant(101), 100)


@pytest.fixture(scope="session")
def basis_385_200():
    return _shared_cache.get(Lattice.equidistant(385), 200)


def sp3_lines(start: datetime, n_epochs: int, satellites, value_fn,
              version: str = "c", bad=(), interval_s: float = 900.0):
    """Build SP3 text for fixtures; value_fn(sat, coord, epoch_index) -> km.

    ``bad`` is a set of (epoch_index, satellite) written with the zero-position
    convention for missing values.
    """
    sats = list(satellites)
    lines = [
        "#%sP%4d %2d %2d %2d %2d %11.8f %7d ORBIT IGS08 HLM  IGS"
        % (version, start.year, start.month, start.day, start.hour, start.minute,
           start.second + start.microsecond / 1e6, n_epochs),
        "## 1564 432000.00000000 %14.8f 55197 0.0000000000000" % interval_s,
    ]
    pad = sats + ["  0"] * (17 - len(sats))
    lines.append("+   %2d   %s" % (len(sats), "".join("%3s" % s for s in pad)))
    lines.append("++       %s" % "".join("%3d" % 2 for _ in range(17)))
    lines.append("%c G  cc GPS ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc")
    lines.append("%c cc cc ccc ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc")
    lines.append("%f  1.2500000  1.025000000  0.00000000000  0.000000000000000")
    lines.append("%f  0.0000000  0.000000000  0.00000000000  0.000000000000000")
    lines.append("%i    0    0    0    0      0      0      0      0         0")
    lines.append("%i    0    0    0    0      0      0      0      0         0")
    lines.append("/* fixture file")
    for i in range(n_epochs):
        e = start + timedelta(seconds=interval_s * i)
        lines.append("*  %4d %2d %2d %2d %2d %11.8f"
                     % (e.year, e.month, e.day, e.hour, e.minute,
                        e.second + e.microsecond / 1e6))
        for sat in sats:
            if (i, sat) in bad:
                x = y = z = 0.0
            else:
                x = value_fn(sat, "X", i)
                y = value_fn(sat, "Y", i)
                z = value_fn(sat, "Z", i)
            lines.append("P%s%14.6f%14.6f%14.6f%14.6f" % (sat, x, y, z, 11.123456))
    lines.append("EOF")
    return lines


def smooth_km(sat: str, coord: str, i: int) -> float:
    phase = {"X": 0.1, "Y": 1.7, "Z": 3.9}[coord] + 0.3 * (hash(sat) % 7)
    return 2.55e4 * np.sin(2 * np.pi * i * 900.0 / 43082.0 + phase)


@pytest.fixture()
def sp3_day_text():
    """One complete day, two satellites."""
    return "\n".join(sp3_lines(datetime(2010, 1, 2), 96, ["G01", "G08"], smooth_km)) + "\n"
