"""Phase estimation with one-axis-twisted spin ensembles and parity-based readouts."""

__version__ = "0.1.0"

from .estimation import (  # noqa: E402
    FisherCurve,
    NoiseKernel,
    cfi_from_distribution_pair,
    convolve_noise,
    find_optimal_basis,
    hellinger_sq,
    max_cfi_over_phase,
    moment_sensitivity,
    phase_derivatives,
    qfi_pure,
    state_phase_derivative,
)
from .protocols import (  # noqa: E402
    ProtocolSpec,
    build_protocol,
    evaluate_protocol,
    fixed_T_scan,
    ghz_state,
    squeezing_angle,
)
from .spin import (  # noqa: E402
    BasisSpec,
    CollectiveOperator,
    DickeState,
    OutcomeDistribution,
    coherent_state,
    collective_basis,
    make_collective_operator,
    measurement_distribution,
    oat_phase,
    parity_check,
    rotate,
)
from .theorem import verify_theorem  # noqa: E402

__all__ = [
    "BasisSpec", "CollectiveOperator", "DickeState", "FisherCurve", "NoiseKernel",
    "OutcomeDistribution", "ProtocolSpec", "build_protocol", "cfi_from_distribution_pair",
    "coherent_state", "collective_basis", "convolve_noise", "evaluate_protocol",
    "find_optimal_basis", "fixed_T_scan", "ghz_state", "hellinger_sq",
    "make_collective_operator", "max_cfi_over_phase", "measurement_distribution",
    "moment_sensitivity", "oat_phase", "parity_check", "phase_derivatives", "qfi_pure",
    "rotate", "squeezing_angle", "state_phase_derivative", "verify_theorem",
]
