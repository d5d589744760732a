"""Sliding-window residue analysis: robust spike detection, classification of the
characteristic jump / outlier residue patterns, magnitude estimation and event
merging across overlapping windows.

High-degree least-squares residues respond to a step with a pair of adjacent
opposite-sign spikes (roughly a third of the step size each) and to an isolated
deviation with one central spike flanked by smaller opposite-sign recoil spikes.
Both response factors depend on the window length / fit degree geometry, so they
are measured by running the unit experiments at the requested geometry rather
than hard-coded.  Spike thresholds use a median-absolute-deviation noise scale,
which ignores the very anomalies being measured.  The outermost points of every
window are blind (the residue decays to nothing there) and are masked; the
window stride keeps every interior epoch unmasked in at least one window.
"""

from __future__ import annotations

import logging
import statistics
from collections import Counter
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import BasisCache, Lattice, NonConvergence
from .fitting import DataSeries, detrend
from .sp3 import InsufficientCoverage, SatelliteSeries

__all__ = [
    "KIND_DAY_JUMP",
    "KIND_ANOMALOUS_JUMP",
    "KIND_OUTLIER",
    "KIND_MANEUVER",
    "KIND_UNCLASSIFIABLE",
    "DetectorConfig",
    "TemplateCalibration",
    "Spike",
    "ClusterCall",
    "AnomalyEvent",
    "WindowTooNoisy",
    "scan_residue",
    "cluster_spikes",
    "classify_pattern",
    "calibrate_templates",
    "sliding_analysis",
    "write_events_jsonl",
    "write_events_csv",
]

log = logging.getLogger(__name__)

KIND_DAY_JUMP = "day-boundary-jump"
KIND_ANOMALOUS_JUMP = "anomalous-jump"
KIND_OUTLIER = "outlier"
KIND_MANEUVER = "maneuver-like"
KIND_UNCLASSIFIABLE = "unclassifiable"

_KIND_PRECEDENCE = (
    KIND_OUTLIER,
    KIND_DAY_JUMP,
    KIND_ANOMALOUS_JUMP,
    KIND_MANEUVER,
    KIND_UNCLASSIFIABLE,
)

MAD_TO_SIGMA = 1.4826


class WindowTooNoisy(RuntimeError):
    """Robust noise estimate of a window exceeds the configured ceiling."""


@dataclass(frozen=True)
class DetectorConfig:
    """Sliding-window detector settings; lengths are in grid points, magnitudes in km."""

    window_points: int = 384
    degree: int = 200
    step_points: int = 96
    spike_threshold_factor: float = 6.0
    boundary_mask_points: int = 8
    cluster_gap: int = 3
    min_correlation: float = 0.6
    min_window_votes: int = 2
    numerical_floor_factor: float = 512.0
    large_anomaly_floor_km: float = 2e-4
    noise_ceiling_km: float | None = None
    max_gap_fraction: float = 0.05
    orth_tol: float | None = None
    jump_spike_ratio: float | None = None
    outlier_recovery_ratio: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.degree < self.window_points:
            raise ValueError("need 0 < degree < window_points")
        if self.step_points < 1:
            raise ValueError("step_points must be >= 1")
        if self.boundary_mask_points < 0:
            raise ValueError("boundary_mask_points must be >= 0")
        if self.window_points - 2 * self.boundary_mask_points < 3:
            raise ValueError("mask leaves no interior")
        if self.min_window_votes < 1:
            raise ValueError("min_window_votes must be >= 1")


@dataclass(frozen=True)
class TemplateCalibration:
    """Unit-experiment responses for one (window length, degree) geometry.

    The response to a unit step or unit impulse depends on where in the window
    it happens, fading toward the edges well before the hard decay zone, so the
    responses are kept per position: ``jump_ratio_curve[j]`` is the mean spike
    pair magnitude for a unit step starting at point j, ``recovery_curve[j]``
    the central-plus-recoil response for a unit impulse at j.  The scalar
    ratios are the curve values at the reference position (40% of the window).
    ``reliable_lo..reliable_hi`` is the position range where both responses
    stay above half their reference values and magnitudes can be trusted.
    """

    window_points: int
    degree: int
    jump_spike_ratio: float
    outlier_recovery_ratio: float
    outlier_total_ratio: float
    jump_template: np.ndarray
    outlier_template: np.ndarray
    half_width: int
    jump_ratio_curve: np.ndarray
    recovery_curve: np.ndarray
    reliable_lo: int
    reliable_hi: int


@dataclass(frozen=True)
class Spike:
    index: int
    value: float


@dataclass(frozen=True)
class ClusterCall:
    """Classification verdict for one spike cluster, in window coordinates.

    ``reliable`` is False when the feature sits outside the calibration's
    trustworthy position range; such calls only count when no window can see
    the epoch from a reliable position.
    """

    kind: str  # jump / outlier / maneuver-like / unclassifiable
    index: int
    magnitude: float
    confidence: float
    reliable: bool = True


@dataclass(frozen=True)
class AnomalyEvent:
    satellite: str
    coordinate: str
    epoch: datetime
    kind: str
    magnitude_km: float
    confidence: float
    windows: tuple[int, ...]


_calibration_cache: dict[tuple[int, int], TemplateCalibration] = {}
_calibration_basis_cache = BasisCache(directory=None)


def calibrate_templates(window_points: int, degree: int) -> TemplateCalibration:
    """Measure the unit-jump and unit-impulse responses at the given geometry.

    The residue of any input is (I - V V^T) applied to it (V holding the basis
    columns up to the fit degree), so one kernel product yields the impulse
    response at every position, and one more the step response at every
    position.  The jump ratio is the mean magnitude of the opposite-sign spike
    pair next to a unit step; the impulse recovery is the central spike plus
    the mean of its opposite-sign recoil neighbors.  Results are cached per
    geometry.
    """
    if not 0 < degree < window_points:
        raise ValueError("need 0 < degree < window_points")
    key = (window_points, degree)
    cached = _calibration_cache.get(key)
    if cached is not None:
        return cached

    basis = _calibration_basis_cache.get(Lattice.equidistant(window_points), degree)
    V = basis.values
    kernel = V @ V.T
    n = window_points

    # unit impulse at j: residue column j of I - kernel
    impulse = np.eye(n) - kernel
    central = np.diag(impulse).copy()
    recovery_curve = central.copy()
    for j in range(n):
        recoil = 0.0
        for q in (j - 1, j + 1):
            if 0 <= q < n and impulse[q, j] * central[j] < 0:
                recoil += abs(impulse[q, j])
        recovery_curve[j] += recoil / 2.0

    # unit step starting at j: residue column j of (I - kernel) @ lower-triangular ones
    step_resid = np.tril(np.ones((n, n))) - V @ (V.T @ np.tril(np.ones((n, n))))
    jump_ratio_curve = np.zeros(n)
    for j in range(1, n):
        a, b = step_resid[j, j], step_resid[j - 1, j]
        jump_ratio_curve[j] = 0.5 * (abs(a) + abs(b)) if a * b < 0 else 0.0

    at = round(0.4 * (window_points - 1))
    half = 8
    ref_jump = float(jump_ratio_curve[at])
    ref_recovery = float(recovery_curve[at])
    good = (jump_ratio_curve >= 0.5 * ref_jump) & (recovery_curve >= 0.5 * ref_recovery)
    good_idx = np.flatnonzero(good)

    ro = impulse[:, at]
    cal = TemplateCalibration(
        window_points=window_points,
        degree=degree,
        jump_spike_ratio=ref_jump,
        outlier_recovery_ratio=ref_recovery,
        outlier_total_ratio=float(abs(ro[at]) + abs(ro[at - 1]) + abs(ro[at + 1])),
        jump_template=_segment(step_resid[:, at], at, half),
        outlier_template=_segment(ro, at, half),
        half_width=half,
        jump_ratio_curve=jump_ratio_curve,
        recovery_curve=recovery_curve,
        reliable_lo=int(good_idx[0]),
        reliable_hi=int(good_idx[-1]),
    )
    _calibration_cache[key] = cal
    return cal


def _segment(values: np.ndarray, center: int, half: int) -> np.ndarray:
    """Length 2*half+1 slice around ``center``, zero-padded at the array edges."""
    out = np.zeros(2 * half + 1)
    lo = max(0, center - half)
    hi = min(len(values), center + half + 1)
    out[lo - (center - half) : hi - (center - half)] = values[lo:hi]
    return out


def scan_residue(
    residue: np.ndarray,
    lattice: Lattice,
    config: DetectorConfig,
    noise_floor: float = 0.0,
) -> list[Spike]:
    """Interior points whose residue exceeds the robust threshold.

    The noise scale is the median absolute deviation over the unmasked interior,
    scaled to sigma; the outermost ``boundary_mask_points`` on each side are
    excluded outright since the residue there is blind to anomalies.
    ``noise_floor`` (same units as the residue) keeps the threshold above the
    floating-point floor of the fit when the data is smoother than the working
    precision can express; the sliding analysis sets it from the window scale.
    """
    residue = np.asarray(residue, dtype=np.float64)
    if residue.shape != (lattice.n_points,):
        raise ValueError("residue length does not match lattice")
    mask = config.boundary_mask_points
    interior = residue[mask : len(residue) - mask] if mask else residue
    if interior.size == 0:
        return []
    med = np.median(interior)
    sigma = MAD_TO_SIGMA * float(np.median(np.abs(interior - med)))
    if config.noise_ceiling_km is not None and sigma > config.noise_ceiling_km:
        raise WindowTooNoisy(
            f"robust noise {sigma:.3e} exceeds ceiling {config.noise_ceiling_km:.3e}"
        )
    peak = float(np.max(np.abs(interior)))
    if peak == 0.0:
        return []
    sigma = max(sigma, 1e-15 * peak)  # degenerate MAD guard
    threshold = max(config.spike_threshold_factor * sigma, noise_floor)
    out = []
    for i in range(mask, len(residue) - mask):
        if abs(residue[i]) > threshold:
            out.append(Spike(index=i, value=float(residue[i])))
    return out


def cluster_spikes(spikes: Sequence[Spike], gap: int) -> list[list[Spike]]:
    """Group spikes whose indices are within ``gap`` of the previous one."""
    clusters: list[list[Spike]] = []
    for spike in sorted(spikes, key=lambda s: s.index):
        if clusters and spike.index - clusters[-1][-1].index <= gap:
            clusters[-1].append(spike)
        else:
            clusters.append([spike])
    return clusters


def _best_correlation(segment: np.ndarray, template: np.ndarray, shifts: int = 2) -> float:
    """Max absolute cosine similarity over small alignment shifts."""
    tnorm = float(np.linalg.norm(template))
    if tnorm == 0.0:
        return 0.0
    best = 0.0
    for s in range(-shifts, shifts + 1):
        seg = np.roll(segment, s)
        snorm = float(np.linalg.norm(seg))
        if snorm == 0.0:
            continue
        best = max(best, abs(float(seg @ template)) / (snorm * tnorm))
    return best


def _curve_at(curve: np.ndarray, pos: int, reference: float) -> float:
    """Calibration response at a nominal position, floored against blowups."""
    pos = min(max(pos, 0), len(curve) - 1)
    return max(float(curve[pos]), 0.05 * reference)


def classify_pattern(
    residue: np.ndarray,
    cluster: Sequence[Spike],
    calibration: TemplateCalibration,
    config: DetectorConfig,
    positions: np.ndarray | None = None,
) -> ClusterCall:
    """Classify one spike cluster by correlating the local residue shape against
    the calibrated jump and outlier templates.

    Jump magnitude comes from the opposite-sign adjacent pair, outlier magnitude
    from the central spike plus recoil, each divided by the calibrated unit
    response at the feature's window position (``positions`` maps sample index
    to nominal position, for windows with gaps).  Shapes matching neither
    template are maneuver-like when they exceed the large-anomaly floor and
    unclassifiable otherwise.
    """
    if not cluster:
        raise ValueError("empty spike cluster")
    peak = max(cluster, key=lambda s: abs(s.value))
    p = peak.index

    def pos_of(i: int) -> int:
        return int(positions[i]) if positions is not None else i

    seg = _segment(residue, p, calibration.half_width)
    corr_jump = _best_correlation(seg, calibration.jump_template)
    corr_outlier = _best_correlation(seg, calibration.outlier_template)

    # opposite-sign neighbor with the largest magnitude, if any
    pair_idx = None
    pair_val = 0.0
    for q in (p - 1, p + 1):
        if 0 <= q < len(residue) and residue[q] * peak.value < 0:
            if abs(residue[q]) > abs(pair_val):
                pair_idx, pair_val = q, float(residue[q])

    best = max(corr_jump, corr_outlier)
    if best >= config.min_correlation and corr_jump >= corr_outlier and pair_idx is not None:
        anchor = max(p, pair_idx)
        pos = pos_of(anchor)
        ratio = _curve_at(calibration.jump_ratio_curve, pos, calibration.jump_spike_ratio)
        return ClusterCall(
            kind="jump",
            index=anchor,
            magnitude=float(0.5 * (abs(peak.value) + abs(pair_val)) / ratio),
            confidence=corr_jump,
            reliable=calibration.reliable_lo <= pos <= calibration.reliable_hi,
        )
    if best >= config.min_correlation and corr_outlier > corr_jump:
        recoil = 0.0
        count = 0
        for q in (p - 1, p + 1):
            if 0 <= q < len(residue) and residue[q] * peak.value < 0:
                recoil += abs(residue[q])
                count += 1
        observed = abs(peak.value) + (recoil / 2 if count else 0.0)
        pos = pos_of(p)
        ratio = _curve_at(calibration.recovery_curve, pos, calibration.outlier_recovery_ratio)
        return ClusterCall(
            kind="outlier",
            index=p,
            magnitude=float(observed / ratio),
            confidence=corr_outlier,
            reliable=calibration.reliable_lo <= pos <= calibration.reliable_hi,
        )
    pos = pos_of(p)
    proxy = abs(peak.value) / _curve_at(
        calibration.jump_ratio_curve, pos, calibration.jump_spike_ratio
    )
    reliable = calibration.reliable_lo <= pos <= calibration.reliable_hi
    if proxy >= config.large_anomaly_floor_km:
        return ClusterCall(kind=KIND_MANEUVER, index=p, magnitude=float(proxy),
                           confidence=best, reliable=reliable)
    return ClusterCall(kind=KIND_UNCLASSIFIABLE, index=p, magnitude=float(proxy),
                       confidence=best, reliable=reliable)


def _is_midnight(epoch: datetime) -> bool:
    return epoch.hour == 0 and epoch.minute == 0 and epoch.second == 0 and epoch.microsecond == 0


def _window_offsets(n_nominal: int, window: int, step: int) -> list[int]:
    offsets = list(range(0, n_nominal - window + 1, step))
    last = n_nominal - window
    if offsets and offsets[-1] != last:
        offsets.append(last)
    return offsets


def sliding_analysis(
    series: SatelliteSeries,
    config: DetectorConfig = DetectorConfig(),
    basis_cache: BasisCache | None = None,
) -> list[AnomalyEvent]:
    """Run the detector over every window position of a satellite series.

    Windows advance by ``step_points`` on the nominal grid (compared to the
    window length, the stride guarantees every interior epoch is unmasked in at
    least one window); a trailing window is added when the stride does not land
    on the series end.  Events from overlapping windows that point at the same
    epoch are merged: median magnitude, majority kind, union of window offsets.
    Windows that fail coverage or noise checks are logged and skipped.
    """
    if series.n_nominal < config.window_points:
        raise InsufficientCoverage(
            f"series spans {series.n_nominal} nominal epochs, "
            f"window needs {config.window_points}"
        )
    cache = basis_cache if basis_cache is not None else BasisCache()
    calibration = calibrate_templates(config.window_points, config.degree)
    if config.jump_spike_ratio is not None:
        calibration = replace(
            calibration,
            jump_spike_ratio=config.jump_spike_ratio,
            jump_ratio_curve=np.full(config.window_points, config.jump_spike_ratio),
        )
    if config.outlier_recovery_ratio is not None:
        calibration = replace(
            calibration,
            outlier_recovery_ratio=config.outlier_recovery_ratio,
            recovery_curve=np.full(config.window_points, config.outlier_recovery_ratio),
        )

    nominal = series.nominal_indices()
    offsets = _window_offsets(series.n_nominal, config.window_points, config.step_points)
    raw: list[tuple[datetime, int, int, ClusterCall]] = []
    for offset in offsets:
        in_window = np.flatnonzero(
            (nominal >= offset) & (nominal < offset + config.window_points)
        )
        n_present = int(in_window.size)
        missing = config.window_points - n_present
        if missing > config.max_gap_fraction * config.window_points:
            log.warning(
                "window at offset %d skipped: %d of %d epochs missing",
                offset, missing, config.window_points,
            )
            continue
        if config.degree >= n_present:
            log.warning("window at offset %d skipped: too few points for degree", offset)
            continue
        rel_positions = nominal[in_window] - offset
        lattice = Lattice(rel_positions.astype(np.float64) * 900.0)
        window_series = DataSeries(lattice, series.values[in_window])
        try:
            # complete basis: the residue is synthesized from the high-degree
            # tail, which keeps the boundary decay real instead of leaving the
            # floating-point floor of a fit subtraction there
            basis = cache.get(lattice, n_present - 1, config.orth_tol)
            fit = detrend(basis, window_series, config.degree, residue_from_tail=True)
            residue = fit.residue
            spikes = scan_residue(residue, lattice, config)
        except (NonConvergence, WindowTooNoisy) as exc:
            log.warning("window at offset %d skipped: %s", offset, exc)
            continue
        for cluster in cluster_spikes(spikes, config.cluster_gap):
            call = classify_pattern(residue, cluster, calibration, config, rel_positions)
            abs_index = int(nominal[in_window[call.index]])
            raw.append((series.epochs[in_window[call.index]], abs_index, offset, call))

    return _merge_events(series, raw, offsets, calibration, config)


def _merge_events(
    series: SatelliteSeries,
    raw: list[tuple[datetime, int, int, ClusterCall]],
    offsets: list[int],
    calibration: TemplateCalibration,
    config: DetectorConfig,
) -> list[AnomalyEvent]:
    """Deduplicate per-window calls into events.

    Calls from reliable window positions carry the votes; an epoch needs
    ``min_window_votes`` of them (capped by how many windows can actually see
    it from a reliable position), which suppresses one-window artifacts such as
    far ripple lobes of a large anomaly.  Epochs that no window covers reliably
    fall back to their unreliable calls with a single-vote quorum.
    """
    by_epoch: dict[datetime, list[tuple[int, int, ClusterCall]]] = {}
    for epoch, abs_index, offset, call in sorted(raw, key=lambda r: (r[0], r[2])):
        by_epoch.setdefault(epoch, []).append((abs_index, offset, call))

    events = []
    for epoch, entries in by_epoch.items():
        abs_index = entries[0][0]
        n_eligible = sum(
            1 for o in offsets
            if calibration.reliable_lo <= abs_index - o <= calibration.reliable_hi
        )
        contributions = [(o, c) for _, o, c in entries if c.reliable]
        if n_eligible > 0:
            if len(contributions) < min(config.min_window_votes, n_eligible):
                continue
        else:
            contributions = [(o, c) for _, o, c in entries]
        if not contributions:
            continue
        magnitude = float(statistics.median(c.magnitude for _, c in contributions))
        kinds = [_resolve_kind(c.kind, epoch, magnitude, config) for _, c in contributions]
        counts = Counter(kinds)
        top = max(counts.values())
        kind = next(k for k in _KIND_PRECEDENCE if counts.get(k) == top)
        events.append(
            AnomalyEvent(
                satellite=series.satellite,
                coordinate=series.coordinate,
                epoch=epoch,
                kind=kind,
                magnitude_km=magnitude,
                confidence=max(c.confidence for _, c in contributions),
                windows=tuple(sorted({o for o, _ in contributions})),
            )
        )
    events.sort(key=lambda e: (e.epoch, e.coordinate, e.kind))
    return events


def _resolve_kind(kind: str, epoch: datetime, magnitude: float, config: DetectorConfig) -> str:
    """Map a raw cluster verdict to the event taxonomy.

    Steps at a 00:00:00 epoch are the routine day-boundary product seams unless
    they exceed the large-anomaly floor; everything else step-like is an
    anomalous jump regardless of the clock.
    """
    if kind != "jump":
        return kind
    if _is_midnight(epoch) and magnitude < config.large_anomaly_floor_km:
        return KIND_DAY_JUMP
    return KIND_ANOMALOUS_JUMP


def write_events_jsonl(events: Sequence[AnomalyEvent], path: str | Path) -> Path:
    import json

    path = Path(path)
    with open(path, "w") as fh:
        for e in events:
            fh.write(
                json.dumps(
                    {
                        "satellite": e.satellite,
                        "coordinate": e.coordinate,
                        "epoch": e.epoch.isoformat(),
                        "kind": e.kind,
                        "magnitude_km": e.magnitude_km,
                        "confidence": e.confidence,
                        "windows": list(e.windows),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return path


def write_events_csv(events: Sequence[AnomalyEvent], path: str | Path) -> Path:
    import csv

    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["satellite", "coordinate", "epoch", "kind", "magnitude_km", "confidence", "windows"]
        )
        for e in events:
            writer.writerow(
                [
                    e.satellite,
                    e.coordinate,
                    e.epoch.isoformat(),
                    e.kind,
                    repr(e.magnitude_km),
                    repr(e.confidence),
                    "|".join(str(w) for w in e.windows),
                ]
            )
    return path
