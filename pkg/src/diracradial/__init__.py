"""Numerical spectral and transport toolkit for 2D massless Dirac operators
with radially symmetric electric and magnetic fields.

The operator decomposes over angular-momentum channels into half-line block
operators indexed by half-integers m = j + 1/2.  This package discretizes the
channels on staggered grids, verifies the confinement conditions on field
profiles, computes windowed spectra with eigenvalue-count bounds and
weighted-norm decay certificates, and simulates window-filtered transport
moments to separate dynamically localized from ballistic regimes.
"""

__version__ = "0.1.0"

from .fields import (
    Con0ViolationError,
    CutoffSet,
    FieldProfile,
    HypothesisReport,
    ProfileError,
    agmon_weight,
    agmon_weight_grid,
    make_callable_profile,
    make_profile,
    make_cutoffs,
    smoothstep,
    turning_radius,
    vector_potential_from_B,
    verify_hypothesis,
)
from .operators import (
    AssemblyError,
    Channel,
    ChannelOperator,
    RadialGrid,
    SquaredMagneticOperator,
    assemble_channel_matrix,
    assemble_squared_magnetic,
    auto_grid,
    m_of,
)
from .spectral import (
    AgmonReport,
    BargmannEntry,
    EigenSet,
    EigenSolveError,
    agmon_check,
    bargmann_bound,
    box_scaling_diagnostic,
    count_in_window,
    eigs_in_window,
    tail_log_envelope,
)
from .dynamics import (
    DensityField,
    MomentSeries,
    WavePacket,
    build_wavepacket,
    evolve,
    fit_time_average_exponent,
    moment,
    moment_series,
    project_window,
    synthesize_density,
    tail_bound,
)

__all__ = [
    "__version__",
    # fields
    "FieldProfile", "HypothesisReport", "CutoffSet", "ProfileError",
    "Con0ViolationError", "make_profile", "make_callable_profile",
    "vector_potential_from_B", "verify_hypothesis", "agmon_weight",
    "agmon_weight_grid", "turning_radius", "make_cutoffs", "smoothstep",
    # operators
    "Channel", "RadialGrid", "ChannelOperator", "SquaredMagneticOperator",
    "AssemblyError", "m_of", "assemble_channel_matrix",
    "assemble_squared_magnetic", "auto_grid",
    # spectral
    "EigenSet", "BargmannEntry", "AgmonReport", "EigenSolveError",
    "eigs_in_window", "count_in_window", "bargmann_bound", "agmon_check",
    "box_scaling_diagnostic", "tail_log_envelope",
    # dynamics
    "WavePacket", "MomentSeries", "DensityField", "build_wavepacket",
    "project_window", "evolve", "moment", "tail_bound", "moment_series",
    "synthesize_density", "fit_time_average_exponent",
]
