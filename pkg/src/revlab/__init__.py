"""Numerical lab for surfaces of revolution: loopsets, separated Laplace
eigenfunctions, local Weyl remainders and return-time measures."""

from .geometry import (
    BandProfile,
    BridgeSpec,
    CustomProfile,
    FlatTorus,
    FourierTorus,
    MetricError,
    ProfileMetric,
    RoundSphere,
    Topology,
    build_bridge_metric,
    build_profile_metric,
    profile_diagnostics,
)
from .geodesics import (
    PhasePoint,
    flow_geodesic,
    jacobi_transfer,
    loop_length,
    loopset_scan,
)
from .spectrum import (
    analytic_spectrum,
    assemble_spectral_table,
    cached_spectral_table,
    mode_statistics,
    solve_equivariant_modes,
)
from .weyl import (
    global_weyl,
    growth_exponent_fit,
    local_weyl_series,
    return_time_measure,
    sup_norm_functional,
)

__version__ = "0.1.0"
