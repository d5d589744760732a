"""Reading of SP3-c / SP3-d precise ephemeris text files and assembly of
per-satellite coordinate series on the nominal 15-minute epoch grid.

Only position records are used.  Values are kept in kilometers exactly as
printed (the files carry millimeter-resolution decimals whose rounding noise is
itself a signal downstream, so nothing is re-rounded).  Missing or bad epochs
are never interpolated; they are dropped from the lattice, which then comes out
perturbed and is handled by the basis builder as such.
"""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .basis import Lattice

__all__ = [
    "Sp3Error",
    "MalformedHeader",
    "MalformedEpochLine",
    "UnknownVersion",
    "InsufficientCoverage",
    "Sp3ParseIssue",
    "Sp3Header",
    "Sp3Record",
    "Sp3File",
    "SatelliteSeries",
    "parse_sp3",
    "format_position_line",
    "find_sp3_files",
    "assemble_window",
    "assemble_span",
]

NOMINAL_STEP_S = 900.0
EPOCHS_PER_DAY = 96
BAD_CLOCK_SENTINEL = 999999.999999

_SAT_ID_RE = re.compile(r"^[A-Z]\d\d$")


class Sp3Error(ValueError):
    pass


class MalformedHeader(Sp3Error):
    pass


class MalformedEpochLine(Sp3Error):
    pass


class UnknownVersion(Sp3Error):
    pass


class InsufficientCoverage(Sp3Error):
    """Too many epochs of the requested window are missing or bad."""


@dataclass(frozen=True)
class Sp3ParseIssue:
    line_no: int
    reason: str
    text: str


@dataclass(frozen=True)
class Sp3Header:
    version: str
    start: datetime
    epoch_count: int
    interval_s: float
    satellites: tuple[str, ...]
    time_system: str
    coord_system: str


@dataclass(frozen=True)
class Sp3Record:
    epoch: datetime
    satellite: str
    x: float
    y: float
    z: float
    clock: float
    bad_position: bool = False
    bad_clock: bool = False
    line_no: int = -1

    def position(self, coordinate: str) -> float:
        try:
            return {"X": self.x, "Y": self.y, "Z": self.z}[coordinate]
        except KeyError:
            raise ValueError(f"coordinate must be X, Y or Z, got {coordinate!r}") from None


@dataclass(frozen=True)
class Sp3File:
    header: Sp3Header
    records: tuple[Sp3Record, ...]
    issues: tuple[Sp3ParseIssue, ...] = ()
    path: str | None = None


def _iter_lines(source: str | Path | IO) -> tuple[list[str], str | None]:
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("ascii", errors="replace")
        return data.splitlines(), getattr(source, "name", None)
    path = Path(source)
    return path.read_text(encoding="ascii", errors="replace").splitlines(), str(path)


def _parse_epoch_fields(fields: list[str]) -> datetime:
    year, month, day, hour, minute = (int(f) for f in fields[:5])
    sec = float(fields[5])
    whole = int(sec)
    micros = int(round((sec - whole) * 1e6))
    return datetime(year, month, day, hour, minute, whole) + timedelta(microseconds=micros)


def parse_sp3(source: str | Path | IO) -> Sp3File:
    """Parse one SP3-c or SP3-d file into header metadata plus position records.

    Velocity and extended (EP/EV) records are skipped.  Structural problems in
    the header or in epoch lines raise; problems confined to individual position
    lines are collected as issues and parsing continues.
    """
    lines, path = _iter_lines(source)
    if not lines or not lines[0].startswith("#"):
        raise MalformedHeader("missing SP3 header line")
    first = lines[0]
    version = first[1:2]
    if version not in ("c", "d"):
        raise UnknownVersion(f"unsupported SP3 version {version!r}")
    try:
        start = _parse_epoch_fields(first[3:].split()[:6])
        epoch_count = int(first[32:39])
        coord_system = first[46:51].strip()
    except (ValueError, IndexError) as exc:
        raise MalformedHeader(f"bad first header line: {exc}") from exc

    if len(lines) < 2 or not lines[1].startswith("##"):
        raise MalformedHeader("missing '##' header line")
    try:
        interval_s = float(lines[1][24:38])
    except ValueError as exc:
        raise MalformedHeader(f"bad interval field: {exc}") from exc

    satellites: list[str] = []
    time_system = ""
    body_start = None
    for idx, line in enumerate(lines[2:], start=2):
        tag = line[:2]
        if tag == "+ ":
            chunk = line[9:60]
            for k in range(0, len(chunk) - 2, 3):
                sat = chunk[k : k + 3].strip()
                if _SAT_ID_RE.match(sat):
                    satellites.append(sat)
        elif tag == "%c" and not time_system:
            time_system = line[9:12].strip()
        elif line.startswith("*"):
            body_start = idx
            break
    if body_start is None:
        raise MalformedHeader("file has no epoch records")

    header = Sp3Header(
        version=version,
        start=start,
        epoch_count=epoch_count,
        interval_s=interval_s,
        satellites=tuple(satellites),
        time_system=time_system,
        coord_system=coord_system,
    )

    records: list[Sp3Record] = []
    issues: list[Sp3ParseIssue] = []
    epoch: datetime | None = None
    for line_no, line in enumerate(lines[body_start:], start=body_start + 1):
        if line.startswith("EOF"):
            break
        if line.startswith("*"):
            fields = line[1:].split()
            try:
                epoch = _parse_epoch_fields(fields)
            except (ValueError, IndexError) as exc:
                raise MalformedEpochLine(f"line {line_no}: {line!r}") from exc
            continue
        if not line.startswith("P"):
            continue  # V, EP, EV, comments inside the body
        if epoch is None:
            issues.append(Sp3ParseIssue(line_no, "position record before any epoch", line))
            continue
        sat = line[1:4]
        if not _SAT_ID_RE.match(sat):
            issues.append(Sp3ParseIssue(line_no, f"bad satellite id {sat!r}", line))
            continue
        try:
            x = float(line[4:18])
            y = float(line[18:32])
            z = float(line[32:46])
            clock = float(line[46:60]) if line[46:60].strip() else BAD_CLOCK_SENTINEL
        except ValueError:
            issues.append(Sp3ParseIssue(line_no, "unparseable position fields", line))
            continue
        records.append(
            Sp3Record(
                epoch=epoch,
                satellite=sat,
                x=x,
                y=y,
                z=z,
                clock=clock,
                bad_position=(x == 0.0 and y == 0.0 and z == 0.0),
                bad_clock=clock >= BAD_CLOCK_SENTINEL,
                line_no=line_no,
            )
        )
    return Sp3File(header=header, records=tuple(records), issues=tuple(issues), path=path)


def format_position_line(record: Sp3Record) -> str:
    """Render a record back to its fixed-width position line."""
    return "P%s%14.6f%14.6f%14.6f%14.6f" % (
        record.satellite,
        record.x,
        record.y,
        record.z,
        record.clock,
    )


def find_sp3_files(directory: str | Path, pattern: str = "*.sp3") -> list[Path]:
    """SP3 files under a directory matching a filename pattern, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise Sp3Error(f"not a directory: {directory}")
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and fnmatch.fnmatch(p.name.lower(), pattern.lower())
    )


@dataclass(frozen=True)
class SatelliteSeries:
    """One coordinate of one satellite over a requested span of the nominal grid.

    ``gaps`` holds nominal-grid indices with no usable record.  ``shadows`` holds
    values displaced by the duplicate-epoch precedence rule (records present in
    two consecutive daily files), kept observable for jump estimation.
    """

    satellite: str
    coordinate: str
    start_epoch: datetime
    n_nominal: int
    epochs: tuple[datetime, ...]
    values: np.ndarray
    gaps: tuple[int, ...]
    shadows: tuple[tuple[int, float], ...] = ()
    provenance: tuple[tuple[str, int], ...] | None = None

    def nominal_indices(self) -> np.ndarray:
        deltas = np.array(
            [(e - self.start_epoch).total_seconds() for e in self.epochs], dtype=np.float64
        )
        return np.round(deltas / NOMINAL_STEP_S).astype(np.int64)


def _sorted_files(files: Sequence[Sp3File]) -> list[Sp3File]:
    return sorted(files, key=lambda f: (f.header.start, f.path or ""))


def assemble_span(
    files: Sequence[Sp3File],
    satellite: str,
    coordinate: str,
    start_epoch: datetime,
    n_epochs: int,
    *,
    max_gap_fraction: float = 0.05,
    debug: bool = False,
) -> tuple[SatelliteSeries, Lattice]:
    """Assemble ``n_epochs`` points of one satellite coordinate starting at
    ``start_epoch`` on the 900 s nominal grid.

    When consecutive files both carry the same epoch, the file with the later
    header start wins and the displaced value is kept as a shadow.  Missing or
    bad epochs are dropped from the lattice (recorded in ``gaps``); more than
    ``max_gap_fraction`` of them raises :class:`InsufficientCoverage`.
    """
    if n_epochs < 1:
        raise ValueError(f"need at least one epoch, got {n_epochs}")
    if coordinate not in ("X", "Y", "Z"):
        raise ValueError(f"coordinate must be X, Y or Z, got {coordinate!r}")
    if not _SAT_ID_RE.match(satellite):
        raise ValueError(f"bad satellite id {satellite!r}")

    slot_value: dict[int, float] = {}
    slot_source: dict[int, tuple[str, int]] = {}
    shadows: list[tuple[int, float]] = []
    for sp3 in _sorted_files(files):
        for rec in sp3.records:
            if rec.satellite != satellite or rec.bad_position:
                continue
            offset = (rec.epoch - start_epoch).total_seconds()
            slot = round(offset / NOMINAL_STEP_S)
            if abs(offset - slot * NOMINAL_STEP_S) > 1e-6 or not 0 <= slot < n_epochs:
                continue
            if slot in slot_value:
                shadows.append((slot, slot_value[slot]))
            slot_value[slot] = rec.position(coordinate)
            slot_source[slot] = (sp3.path or "<stream>", rec.line_no)

    present = sorted(slot_value)
    gaps = tuple(i for i in range(n_epochs) if i not in slot_value)
    if len(gaps) > max_gap_fraction * n_epochs:
        raise InsufficientCoverage(
            f"{len(gaps)} of {n_epochs} epochs missing for {satellite}/{coordinate} "
            f"(limit {max_gap_fraction:.0%})"
        )
    values = np.array([slot_value[i] for i in present], dtype=np.float64)
    epochs = tuple(start_epoch + timedelta(seconds=NOMINAL_STEP_S * i) for i in present)
    lattice = Lattice(np.array(present, dtype=np.float64) * NOMINAL_STEP_S)
    series = SatelliteSeries(
        satellite=satellite,
        coordinate=coordinate,
        start_epoch=start_epoch,
        n_nominal=n_epochs,
        epochs=epochs,
        values=values,
        gaps=gaps,
        shadows=tuple(shadows),
        provenance=tuple(slot_source[i] for i in present) if debug else None,
    )
    return series, lattice


def assemble_window(
    files: Sequence[Sp3File],
    satellite: str,
    coordinate: str,
    start_epoch: datetime,
    n_days: int,
    *,
    max_gap_fraction: float = 0.05,
    debug: bool = False,
) -> tuple[SatelliteSeries, Lattice]:
    """Multi-day analysis window: ``n_days`` times 96 epochs from ``start_epoch``."""
    if n_days < 1:
        raise ValueError(f"need at least one day, got {n_days}")
    return assemble_span(
        files,
        satellite,
        coordinate,
        start_epoch,
        n_days * EPOCHS_PER_DAY,
        max_gap_fraction=max_gap_fraction,
        debug=debug,
    )
