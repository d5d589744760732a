"""Least-squares projection onto an orthonormal basis, trend reconstruction and
residue computation.

The series is centered and scaled before projection and the affine transform is
inverted on output.  Orbit coordinates are ~2.6e4 km while the residues of
interest are 1e-8 km; without the transform those eleven orders of magnitude
would eat the entire double mantissa in the intermediate sums.  The transform is
absorbed exactly by degrees 0 and 1, so residues for any cutoff >= 1 are
analytically unchanged.  Inner products accumulate in extended precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import Lattice, OrthoBasis

__all__ = [
    "DataSeries",
    "FitResult",
    "LatticeMismatch",
    "project",
    "detrend",
    "residue_tail",
    "write_fit_csv",
    "write_fit_sidecar",
]


class LatticeMismatch(ValueError):
    """Series and basis are defined on different lattices."""


@dataclass(frozen=True, eq=False)
class DataSeries:
    """Sampled values on a lattice; ``unit`` is a free-form label."""

    lattice: Lattice
    values: np.ndarray
    unit: str = ""

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.lattice.n_points,):
            raise ValueError(
                f"series length {vals.shape} does not match lattice "
                f"({self.lattice.n_points} points)"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("series values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class FitResult:
    """Full-basis projection coefficients plus the fit/residue split at ``cutoff``."""

    coefficients: np.ndarray
    cutoff: int
    fitted: np.ndarray
    residue: np.ndarray


def _xt_dot(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """matrix.T @ vector with extended-precision accumulation."""
    acc = matrix.T.astype(np.longdouble) @ vector.astype(np.longdouble)
    return np.asarray(acc, dtype=np.float64)


def _dot(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    acc = matrix.astype(np.longdouble) @ vector.astype(np.longdouble)
    return np.asarray(acc, dtype=np.float64)


def _check_lattice(basis: OrthoBasis, series: DataSeries) -> None:
    if not np.array_equal(basis.lattice.points, series.lattice.points):
        raise LatticeMismatch("series lattice differs from basis lattice")


def _centered(series: DataSeries) -> tuple[np.ndarray, float, float]:
    mean = float(series.values.mean())
    shifted = series.values - mean
    scale = float(np.max(np.abs(shifted)))
    if scale == 0.0:
        scale = 1.0
    return shifted / scale, mean, scale


def project(basis: OrthoBasis, series: DataSeries) -> np.ndarray:
    """Projection coefficients of the series onto every basis column."""
    _check_lattice(basis, series)
    fc, mean, scale = _centered(series)
    bc = _xt_dot(basis.values, fc)
    return scale * bc + mean * basis.column_sums()


def detrend(basis: OrthoBasis, series: DataSeries, cutoff: int,
            *, residue_from_tail: bool = False) -> FitResult:
    """Split the series into its degree-``cutoff`` trend and the residue.

    ``fitted + residue`` reproduces the input to rounding, and the residue is
    orthogonal to every column up to the cutoff within the basis tolerance.

    With ``residue_from_tail`` (complete basis required) the residue is
    synthesized from the coefficients above the cutoff instead of subtracting
    the fit.  The two agree on the interior, but subtraction leaves the
    boundary values at the rounding floor of the column construction, around
    1e-16 of the series scale, while the tail inherits the genuine endpoint
    decay of the high-degree columns and vanishes there outright.  Detection
    relies on that decay being real.
    """
    _check_lattice(basis, series)
    if not 0 <= cutoff <= basis.max_degree:
        raise ValueError(f"cutoff {cutoff} outside 0..{basis.max_degree}")
    if residue_from_tail and basis.max_degree != basis.upper_index:
        raise ValueError("tail synthesis needs the complete basis (max_degree == N)")
    fc, mean, scale = _centered(series)
    bc = _xt_dot(basis.values, fc)
    if residue_from_tail:
        residue = scale * _dot(basis.values[:, cutoff + 1 :], bc[cutoff + 1 :])
        fitted = series.values - residue
    else:
        fitted_c = _dot(basis.values[:, : cutoff + 1], bc[: cutoff + 1])
        fitted = mean + scale * fitted_c
        residue = scale * (fc - fitted_c)
    coefficients = scale * bc + mean * basis.column_sums()
    return FitResult(coefficients=coefficients, cutoff=cutoff, fitted=fitted, residue=residue)


def residue_tail(basis: OrthoBasis, coefficients: np.ndarray, cutoff: int) -> np.ndarray:
    """Residue synthesized from the coefficients above the cutoff.

    Requires the complete basis (max degree equal to the lattice upper index),
    where trend plus tail spans the whole data space.  ``cutoff = -1`` makes the
    tail everything, reproducing the series itself.
    """
    if basis.max_degree != basis.upper_index:
        raise ValueError("tail synthesis needs the complete basis (max_degree == N)")
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (basis.max_degree + 1,):
        raise ValueError("coefficient vector length must be max_degree + 1")
    if not -1 <= cutoff <= basis.max_degree:
        raise ValueError(f"cutoff {cutoff} outside -1..{basis.max_degree}")
    if cutoff == basis.max_degree:
        return np.zeros(basis.n_points)
    return _dot(basis.values[:, cutoff + 1 :], coefficients[cutoff + 1 :])


def write_fit_csv(path: str | Path, series: DataSeries, fit: FitResult) -> Path:
    """CSV with one row per lattice point: t, value, fitted, residue."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value", "fitted", "residue"])
        for t, v, p, r in zip(series.lattice.points, series.values, fit.fitted, fit.residue):
            writer.writerow([repr(float(t)), repr(float(v)), repr(float(p)), repr(float(r))])
    return path


def write_fit_sidecar(path: str | Path, series: DataSeries, fit: FitResult,
                      extra: dict | None = None) -> Path:
    """JSON sidecar with the coefficients and fit metadata."""
    path = Path(path)
    payload = {
        "cutoff": fit.cutoff,
        "n_points": series.lattice.n_points,
        "lattice_kind": series.lattice.kind,
        "unit": series.unit,
        "coefficients": [float(b) for b in fit.coefficients],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
