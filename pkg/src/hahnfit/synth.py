"""Synthetic datasets: unit jump / unit impulse test series and an orbit-scale
smooth signal generator with optional millimeter rounding and injected anomalies.

The orbit generator mimics one ECEF coordinate of a navigation satellite: a sum
of slow sinusoids near the orbital and daily periods, tens of thousands of km in
amplitude, sampled every 900 s.  It can be written out as daily SP3 files so the
whole detection pipeline can run end to end against known ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .basis import Lattice
from .fitting import DataSeries
from .sp3 import EPOCHS_PER_DAY, NOMINAL_STEP_S

__all__ = [
    "InjectedAnomaly",
    "OrbitData",
    "jump_series",
    "outlier_series",
    "synth_orbit",
    "write_orbit_csv",
    "write_sp3_corpus",
    "write_ground_truth",
]

COORDINATES = ("X", "Y", "Z")

# periods in seconds: ~half sidereal day (orbital), sidereal day, first harmonic
_PERIODS_S = (43082.0, 86164.0, 21541.0)
_REL_AMPS = (0.92, 0.07, 0.01)


@dataclass(frozen=True)
class InjectedAnomaly:
    kind: str  # "jump" or "outlier"
    coordinate: str
    epoch_index: int
    magnitude_km: float

    def __post_init__(self) -> None:
        if self.kind not in ("jump", "outlier"):
            raise ValueError(f"anomaly kind must be jump or outlier, got {self.kind!r}")
        if self.coordinate not in COORDINATES:
            raise ValueError(f"bad coordinate {self.coordinate!r}")
        if self.epoch_index < 0:
            raise ValueError("epoch_index must be nonnegative")


def jump_series(n_points: int = 101, at: int = 40, magnitude: float = 1.0) -> DataSeries:
    """Step of the given magnitude starting at index ``at`` on the integer lattice."""
    if not 0 <= at < n_points:
        raise ValueError(f"jump index {at} outside 0..{n_points - 1}")
    values = np.zeros(n_points)
    values[at:] = magnitude
    return DataSeries(Lattice.equidistant(n_points), values)


def outlier_series(n_points: int = 101, at: int = 40, magnitude: float = 1.0) -> DataSeries:
    """Single deviating value of the given magnitude at index ``at``."""
    if not 0 <= at < n_points:
        raise ValueError(f"outlier index {at} outside 0..{n_points - 1}")
    values = np.zeros(n_points)
    values[at] = magnitude
    return DataSeries(Lattice.equidistant(n_points), values)


@dataclass(frozen=True)
class OrbitData:
    satellite: str
    start: datetime
    n_days: int
    epochs: tuple[datetime, ...]
    coords: dict[str, np.ndarray]  # km per coordinate
    anomalies: tuple[InjectedAnomaly, ...]
    seed: int

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)


def synth_orbit(
    n_days: int,
    seed: int = 0,
    *,
    amplitude_km: float = 2.6e4,
    round_mm: bool = True,
    anomalies: tuple[InjectedAnomaly, ...] = (),
    start: datetime = datetime(2010, 1, 1),
    satellite: str = "G01",
) -> OrbitData:
    """Smooth orbit-scale signal on the 900 s grid with optional anomalies.

    Anomalies are applied before the millimeter rounding, like the physical
    effects they imitate.  A jump shifts every epoch from its index onward; an
    outlier displaces a single epoch.
    """
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    n_epochs = n_days * EPOCHS_PER_DAY
    for anom in anomalies:
        if anom.epoch_index >= n_epochs:
            raise ValueError(f"anomaly index {anom.epoch_index} outside 0..{n_epochs - 1}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_epochs, dtype=np.float64) * NOMINAL_STEP_S
    coords: dict[str, np.ndarray] = {}
    for coord in COORDINATES:
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(_PERIODS_S))
        vals = np.zeros(n_epochs)
        for period, rel, phase in zip(_PERIODS_S, _REL_AMPS, phases):
            vals += amplitude_km * rel * np.sin(2.0 * np.pi * t / period + phase)
        coords[coord] = vals
    for anom in anomalies:
        if anom.kind == "jump":
            coords[anom.coordinate][anom.epoch_index :] += anom.magnitude_km
        else:
            coords[anom.coordinate][anom.epoch_index] += anom.magnitude_km
    if round_mm:
        for coord in COORDINATES:
            coords[coord] = np.round(coords[coord], 6)  # 1e-6 km = 1 mm
    epochs = tuple(start + timedelta(seconds=NOMINAL_STEP_S * i) for i in range(n_epochs))
    return OrbitData(
        satellite=satellite,
        start=start,
        n_days=n_days,
        epochs=epochs,
        coords=coords,
        anomalies=tuple(anomalies),
        seed=seed,
    )


def write_orbit_csv(orbit: OrbitData, path: str | Path) -> Path:
    """CSV with columns t_seconds, X, Y, Z (kilometers)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("t_seconds,X,Y,Z\n")
        for i in range(orbit.n_epochs):
            t = i * NOMINAL_STEP_S
            fh.write(
                "%s,%s,%s,%s\n"
                % (
                    repr(t),
                    repr(float(orbit.coords["X"][i])),
                    repr(float(orbit.coords["Y"][i])),
                    repr(float(orbit.coords["Z"][i])),
                )
            )
    return path


def _sp3_header_lines(start: datetime, n_epochs: int, satellite: str) -> list[str]:
    sec = start.second + start.microsecond / 1e6
    lines = [
        "#cP%4d %2d %2d %2d %2d %11.8f %7d ORBIT IGS08 HLM  SYN"
        % (start.year, start.month, start.day, start.hour, start.minute, sec, n_epochs),
        "## 0000 000000.00000000   900.00000000 00000 0.0000000000000",
        "+    1   %s  0  0  0  0  0  0  0  0  0  0  0  0  0  0  0  0" % satellite,
        "++         2  0  0  0  0  0  0  0  0  0  0  0  0  0  0  0  0",
        "%c G  cc GPS ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc",
        "%c cc cc ccc ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc",
        "%f  1.2500000  1.025000000  0.00000000000  0.000000000000000",
        "%f  0.0000000  0.000000000  0.00000000000  0.000000000000000",
        "%i    0    0    0    0      0      0      0      0         0",
        "%i    0    0    0    0      0      0      0      0         0",
        "/* synthetic orbit corpus",
    ]
    return lines


def write_sp3_corpus(orbit: OrbitData, outdir: str | Path) -> list[Path]:
    """One SP3-c file per day; the fixed-width format applies the mm rounding."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for day in range(orbit.n_days):
        day_start = orbit.start + timedelta(days=day)
        lines = _sp3_header_lines(day_start, EPOCHS_PER_DAY, orbit.satellite)
        for k in range(EPOCHS_PER_DAY):
            i = day * EPOCHS_PER_DAY + k
            e = orbit.epochs[i]
            sec = e.second + e.microsecond / 1e6
            lines.append(
                "*  %4d %2d %2d %2d %2d %11.8f"
                % (e.year, e.month, e.day, e.hour, e.minute, sec)
            )
            lines.append(
                "P%s%14.6f%14.6f%14.6f%14.6f"
                % (
                    orbit.satellite,
                    orbit.coords["X"][i],
                    orbit.coords["Y"][i],
                    orbit.coords["Z"][i],
                    0.0,
                )
            )
        lines.append("EOF")
        path = outdir / ("syn%s_%s.sp3" % (orbit.satellite, day_start.strftime("%Y%m%d")))
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        paths.append(path)
    return paths


def write_ground_truth(orbit: OrbitData, path: str | Path) -> Path:
    """Sidecar JSON describing the injected anomalies."""
    path = Path(path)
    payload = {
        "satellite": orbit.satellite,
        "seed": orbit.seed,
        "n_days": orbit.n_days,
        "anomalies": [
            {
                "kind": a.kind,
                "coordinate": a.coordinate,
                "epoch_index": a.epoch_index,
                "epoch": orbit.epochs[a.epoch_index].isoformat(),
                "magnitude_km": a.magnitude_km,
            }
            for a in orbit.anomalies
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
