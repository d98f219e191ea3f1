"""Wideband wide-beam coverage optimization for 6D movable antenna arrays.

The package evaluates frequency-dependent beam gains of a rotatable,
repositionable planar array and maximizes the minimum gain over an
angle-frequency coverage grid: a closed-form solution for 1D angular
coverage, and an alternating optimizer (SCA beamforming, SCA positioning,
hybrid grid plus Gibbs-sampling rotation search) for the general case.
"""

from .ao import (
    ALL_SCHEMES,
    AOConfig,
    AOState,
    CoverageProblem,
    SchemeId,
    ao_solve,
    initialize,
    run_scheme,
)
from .closed_form import (
    ClosedForm1DSolution,
    diagnose_ula_2d,
    diagnose_upa_1d,
    solve_1d,
)
from .gain import (
    BeamWeights,
    CoverageGrid,
    GainField,
    array_response,
    beam_gain,
    build_grid,
    db10,
    gain_field,
    min_gain,
    response_matrix,
    uniform_weights,
)
from .geometry import (
    SPEED_OF_LIGHT,
    AntennaLayout,
    DirectionVector,
    LayoutError,
    RotationAngles,
    antenna_position_gcs,
    antenna_positions_gcs,
    direction_vector,
    rotation_matrix,
    wrap_angle,
)
from .rotation import (
    GibbsConfig,
    RotationGridConfig,
    coarse_centers,
    gibbs_neighbors,
    gibbs_refine,
    gibbs_step,
    hybrid_search,
)
from .sca import (
    HermitianLift,
    PenaltyConfig,
    PhaseProjection,
    PositionSurrogate,
    build_position_surrogate,
    extract_weights,
    penalty_majorant,
    phase_projection,
    rank_one_penalty,
    solve_beamforming_step,
    solve_position_step,
)

__version__ = "0.1.0"
