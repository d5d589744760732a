"""hahnfit: numerically stable discrete orthogonal polynomial bases of high degree,
least-squares detrending built on them, and jump/outlier detection in SP3 orbit files.
"""

from .analytic import (
    DecayRegimeWarning,
    HahnParams,
    RootBounds,
    SummandProfile,
    cubic_f,
    decay_bound,
    hahn_norm_sq,
    hahn_value,
    in_decay_regime,
    normalized_hahn_value,
    pochhammer,
    root_bounds,
    summand_profile,
    summand_ratio,
)
from .basis import (
    BasisCache,
    DegenerateLattice,
    Lattice,
    NonConvergence,
    OrthoBasis,
    basis_column,
    build_basis,
    cache_key,
    legendre_seed,
    load_basis,
    normalize_lattice,
    save_basis,
)
from .detect import (
    AnomalyEvent,
    DetectorConfig,
    TemplateCalibration,
    WindowTooNoisy,
    calibrate_templates,
    classify_pattern,
    scan_residue,
    sliding_analysis,
)
from .fitting import DataSeries, FitResult, LatticeMismatch, detrend, project, residue_tail
from .sp3 import (
    InsufficientCoverage,
    MalformedEpochLine,
    MalformedHeader,
    SatelliteSeries,
    Sp3File,
    Sp3Record,
    UnknownVersion,
    assemble_window,
    parse_sp3,
)

__version__ = "0.1.0"
